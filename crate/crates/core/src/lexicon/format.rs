//! Line grammars of the WordNet 3.0 database files.
//!
//! Each parser returns a plain `String` message on failure; the caller attaches
//! the file name and line number.

use std::fmt::Write as _;

use super::{Pos, SynsetId};

/// One word entry in a data line: lemma, lexical id and an optional
/// adjective syntactic marker such as `(p)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DataWord {
    pub lemma: String,
    pub lex_id: u8,
    pub marker: Option<String>,
}

/// A typed relation from one synset (or one of its words) to another.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pointer {
    pub symbol: String,
    pub target: SynsetId,
    /// Word number in the source synset, 0 for a semantic pointer.
    pub source: u8,
    /// Word number in the target synset, 0 for a semantic pointer.
    pub target_word: u8,
}

impl Pointer {
    pub fn is_hypernym(&self) -> bool {
        self.symbol == "@"
    }

    pub fn is_instance_hypernym(&self) -> bool {
        self.symbol == "@i"
    }
}

/// A fully parsed line of a `data.*` file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DataLine {
    pub offset: u32,
    pub lex_filenum: u8,
    pub ss_type: Pos,
    pub words: Vec<DataWord>,
    pub pointers: Vec<Pointer>,
    /// Verb frames as `(f_num, w_num)`.
    pub frames: Vec<(u8, u8)>,
    /// Raw gloss text after the `|` separator, trimmed.
    pub gloss: String,
}

fn next<'a>(it: &mut impl Iterator<Item = &'a str>, what: &str) -> Result<&'a str, String> {
    it.next().ok_or_else(|| format!("missing {what}"))
}

fn dec<T: std::str::FromStr>(s: &str, what: &str) -> Result<T, String> {
    s.parse().map_err(|_| format!("bad {what} {s:?}"))
}

fn hex_u8(s: &str, what: &str) -> Result<u8, String> {
    u8::from_str_radix(s, 16).map_err(|_| format!("bad {what} {s:?}"))
}

pub(crate) fn parse_offset(s: &str) -> Result<u32, String> {
    if s.len() != 8 || !s.bytes().all(|b| b.is_ascii_digit()) {
        return Err(format!("offset {s:?} is not 8 decimal digits"));
    }
    dec(s, "offset")
}

fn split_marker(word: &str) -> (String, Option<String>) {
    for marker in ["(ip)", "(a)", "(p)"] {
        if let Some(stripped) = word.strip_suffix(marker) {
            return (stripped.to_string(), Some(marker.to_string()));
        }
    }
    (word.to_string(), None)
}

impl DataLine {
    pub fn parse(line: &str) -> Result<Self, String> {
        let bar = line.find('|').ok_or("missing '|' gloss separator")?;
        let (fields, gloss) = (&line[..bar], line[bar + 1..].trim());
        let mut it = fields.split_whitespace();

        let offset = parse_offset(next(&mut it, "offset")?)?;
        let lex_filenum = dec(next(&mut it, "lex_filenum")?, "lex_filenum")?;
        let ss_type = Pos::from_code(next(&mut it, "ss_type")?)?;
        let w_cnt = usize::from(hex_u8(next(&mut it, "w_cnt")?, "w_cnt")?);
        if w_cnt == 0 {
            return Err("w_cnt is zero".into());
        }
        let mut words = Vec::with_capacity(w_cnt);
        for _ in 0..w_cnt {
            let (lemma, marker) = split_marker(next(&mut it, "word")?);
            let lex_id = hex_u8(next(&mut it, "lex_id")?, "lex_id")?;
            words.push(DataWord { lemma, lex_id, marker });
        }

        let p_cnt: usize = dec(next(&mut it, "p_cnt")?, "p_cnt")?;
        let mut pointers = Vec::with_capacity(p_cnt);
        for _ in 0..p_cnt {
            let symbol = next(&mut it, "pointer symbol")?.to_string();
            let target_offset = parse_offset(next(&mut it, "pointer offset")?)?;
            let target_pos = Pos::from_code(next(&mut it, "pointer pos")?)?;
            let st = next(&mut it, "source/target")?;
            if st.len() != 4 {
                return Err(format!("bad source/target {st:?}"));
            }
            pointers.push(Pointer {
                symbol,
                target: SynsetId::new(target_pos, target_offset),
                source: hex_u8(&st[..2], "source")?,
                target_word: hex_u8(&st[2..], "target")?,
            });
        }

        let mut frames = Vec::new();
        if ss_type == Pos::Verb {
            if let Some(f_cnt) = it.next() {
                let f_cnt: usize = dec(f_cnt, "f_cnt")?;
                for _ in 0..f_cnt {
                    if next(&mut it, "frame '+'")? != "+" {
                        return Err("frame entry without '+'".into());
                    }
                    let f_num = dec(next(&mut it, "f_num")?, "f_num")?;
                    let w_num = hex_u8(next(&mut it, "w_num")?, "w_num")?;
                    frames.push((f_num, w_num));
                }
            }
        }
        if let Some(extra) = it.next() {
            return Err(format!("unexpected field {extra:?} before gloss"));
        }
        Ok(Self {
            offset,
            lex_filenum,
            ss_type,
            words,
            pointers,
            frames,
            gloss: gloss.to_string(),
        })
    }

    /// Renders the line in database grammar, without the trailing newline.
    pub fn render(&self) -> String {
        let mut s = format!(
            "{:08} {:02} {} {:02x}",
            self.offset,
            self.lex_filenum,
            self.ss_type.code(),
            self.words.len()
        );
        for w in &self.words {
            let _ = write!(s, " {}{} {:x}", w.lemma, w.marker.as_deref().unwrap_or(""), w.lex_id);
        }
        let _ = write!(s, " {:03}", self.pointers.len());
        for p in &self.pointers {
            let _ = write!(
                s,
                " {} {:08} {} {:02x}{:02x}",
                p.symbol,
                p.target.offset,
                p.target.pos.code(),
                p.source,
                p.target_word
            );
        }
        if self.ss_type == Pos::Verb && !self.frames.is_empty() {
            let _ = write!(s, " {:02}", self.frames.len());
            for (f, w) in &self.frames {
                let _ = write!(s, " + {f:02} {w:02x}");
            }
        }
        let _ = write!(s, " | {}  ", self.gloss);
        s
    }
}

/// Splits a raw gloss into its definition and quoted usage examples.
pub fn split_gloss(raw: &str) -> (String, Vec<String>) {
    let raw = raw.trim();
    let Some(q) = raw.find('"') else {
        return (raw.trim_end_matches(';').trim().to_string(), Vec::new());
    };
    let examples = raw[q..]
        .split('"')
        .skip(1)
        .step_by(2)
        .map(|e| e.trim().to_string())
        .filter(|e| !e.is_empty())
        .collect();
    let def = raw[..q].trim().trim_end_matches(';').trim();
    let def = if def.is_empty() { raw } else { def };
    (def.to_string(), examples)
}

/// A line of an `index.{noun,verb,adj,adv}` file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexLine {
    pub lemma: String,
    pub pos: Pos,
    pub ptr_symbols: Vec<String>,
    pub tagsense_cnt: u32,
    /// Offsets in sense-rank order.
    pub offsets: Vec<u32>,
}

impl IndexLine {
    pub fn parse(line: &str) -> Result<Self, String> {
        let mut it = line.split_whitespace();
        let lemma = next(&mut it, "lemma")?.to_string();
        let pos = Pos::from_code(next(&mut it, "pos")?)?;
        let synset_cnt: usize = dec(next(&mut it, "synset_cnt")?, "synset_cnt")?;
        let p_cnt: usize = dec(next(&mut it, "p_cnt")?, "p_cnt")?;
        let ptr_symbols = (0..p_cnt)
            .map(|_| next(&mut it, "ptr_symbol").map(str::to_string))
            .collect::<Result<Vec<_>, _>>()?;
        let sense_cnt: usize = dec(next(&mut it, "sense_cnt")?, "sense_cnt")?;
        if sense_cnt != synset_cnt {
            return Err(format!("sense_cnt {sense_cnt} != synset_cnt {synset_cnt}"));
        }
        let tagsense_cnt = dec(next(&mut it, "tagsense_cnt")?, "tagsense_cnt")?;
        let offsets = it.map(parse_offset).collect::<Result<Vec<_>, _>>()?;
        if offsets.len() != synset_cnt || synset_cnt == 0 {
            return Err(format!("expected {synset_cnt} synset offsets, found {}", offsets.len()));
        }
        Ok(Self {
            lemma,
            pos,
            ptr_symbols,
            tagsense_cnt,
            offsets,
        })
    }

    pub fn render(&self) -> String {
        let mut s = format!(
            "{} {} {} {}",
            self.lemma,
            self.pos.code(),
            self.offsets.len(),
            self.ptr_symbols.len()
        );
        for p in &self.ptr_symbols {
            let _ = write!(s, " {p}");
        }
        let _ = write!(s, " {} {}", self.offsets.len(), self.tagsense_cnt);
        for o in &self.offsets {
            let _ = write!(s, " {o:08}");
        }
        s.push_str("  ");
        s
    }
}

/// A parsed sense key `lemma%ss_type:lex_filenum:lex_id:head_word:head_id`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SenseKeyParts {
    pub lemma: String,
    pub ss_type: Pos,
    pub lex_filenum: u8,
    pub lex_id: u8,
    pub head: String,
}

impl SenseKeyParts {
    pub fn parse(raw: &str) -> Result<Self, String> {
        let (lemma, rest) = raw
            .split_once('%')
            .ok_or_else(|| format!("sense key {raw:?} has no '%'"))?;
        let parts: Vec<&str> = rest.split(':').collect();
        if lemma.is_empty() || parts.len() != 5 {
            return Err(format!("sense key {raw:?} is malformed"));
        }
        let ss_type = match parts[0] {
            "1" => Pos::Noun,
            "2" => Pos::Verb,
            "3" => Pos::Adj,
            "4" => Pos::Adv,
            "5" => Pos::AdjSat,
            other => return Err(format!("bad ss_type {other:?} in sense key")),
        };
        Ok(Self {
            lemma: lemma.to_string(),
            ss_type,
            lex_filenum: dec(parts[1], "lex_filenum")?,
            lex_id: dec(parts[2], "lex_id")?,
            head: parts[3..].join(":"),
        })
    }

    pub fn ss_digit(pos: Pos) -> u8 {
        match pos {
            Pos::Noun => 1,
            Pos::Verb => 2,
            Pos::Adj => 3,
            Pos::Adv => 4,
            Pos::AdjSat => 5,
        }
    }
}

/// A line of `index.sense`: `sense_key synset_offset sense_number tag_cnt`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SenseIndexLine {
    pub key: String,
    pub parts: SenseKeyParts,
    pub offset: u32,
    pub sense_number: u32,
    pub tag_cnt: u32,
}

impl SenseIndexLine {
    pub fn parse(line: &str) -> Result<Self, String> {
        let mut it = line.split_whitespace();
        let key = next(&mut it, "sense key")?.to_string();
        let parts = SenseKeyParts::parse(&key)?;
        let offset = parse_offset(next(&mut it, "synset offset")?)?;
        let sense_number = dec(next(&mut it, "sense_number")?, "sense_number")?;
        let tag_cnt = dec(next(&mut it, "tag_cnt")?, "tag_cnt")?;
        if let Some(extra) = it.next() {
            return Err(format!("unexpected trailing field {extra:?}"));
        }
        Ok(Self {
            key,
            parts,
            offset,
            sense_number,
            tag_cnt,
        })
    }

    pub fn synset(&self) -> SynsetId {
        SynsetId::new(self.parts.ss_type, self.offset)
    }

    pub fn render(&self) -> String {
        format!("{} {:08} {} {}", self.key, self.offset, self.sense_number, self.tag_cnt)
    }
}
