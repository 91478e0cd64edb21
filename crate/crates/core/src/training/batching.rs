use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

/// A batch of row indices drawn from a single task.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Batch {
    pub task: usize,
    pub rows: Vec<usize>,
}

/// Number of batches (the last one may be partial).
pub fn batch_count(rows: usize, batch_size: usize) -> usize {
    rows.div_ceil(batch_size)
}

/// One epoch of batches. Each task's rows are shuffled and cut into batches,
/// then tasks are interleaved in proportion to their batch counts: the next
/// batch comes from the task that is furthest behind its even share, lowest
/// task index on ties.
pub fn epoch_batches(task_sizes: &[usize], batch_size: usize, rng: &mut ChaCha8Rng) -> Vec<Batch> {
    let per_task: Vec<Vec<Vec<usize>>> = task_sizes
        .iter()
        .map(|&n| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(rng);
            idx.chunks(batch_size).map(<[usize]>::to_vec).collect()
        })
        .collect();
    interleave(per_task)
}

fn interleave(per_task: Vec<Vec<Vec<usize>>>) -> Vec<Batch> {
    let counts: Vec<usize> = per_task.iter().map(Vec::len).collect();
    let total: usize = counts.iter().sum();
    let mut emitted = vec![0usize; counts.len()];
    let mut iters: Vec<_> = per_task.into_iter().map(Vec::into_iter).collect();
    let mut out = Vec::with_capacity(total);
    for _ in 0..total {
        let task = (0..counts.len())
            .filter(|&t| emitted[t] < counts[t])
            .min_by(|&a, &b| {
                let ka = (emitted[a] as f64 + 0.5) / counts[a] as f64;
                let kb = (emitted[b] as f64 + 0.5) / counts[b] as f64;
                ka.total_cmp(&kb).then(a.cmp(&b))
            })
            .expect("a task has batches left");
        emitted[task] += 1;
        out.push(Batch {
            task,
            rows: iters[task].next().expect("counted"),
        });
    }
    out
}
