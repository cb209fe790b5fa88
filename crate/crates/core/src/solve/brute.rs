use super::InferenceResult;
use crate::error::{Error, Result};
use crate::logic::Mrf;

pub const MAX_BRUTE_FORCE_VARIABLES: usize = 10;

/// A sum-to-one group or a single unconstrained variable.
enum Block {
    Simplex(Vec<usize>),
    Free(usize),
}

fn grid(step: f64) -> Vec<f64> {
    let m = (1.0 / step + 1e-9).floor() as usize;
    let mut g: Vec<f64> = (0..=m).map(|i| (i as f64 * step).min(1.0)).collect();
    if *g.last().unwrap() < 1.0 - 1e-12 {
        g.push(1.0);
    }
    g
}

/// Every grid point of one block, as values for its variables.
fn block_points(block: &Block, g: &[f64]) -> Vec<Vec<f64>> {
    match block {
        Block::Free(_) => g.iter().map(|&v| vec![v]).collect(),
        Block::Simplex(vars) => {
            let k = vars.len();
            let mut out = Vec::new();
            let mut idx = vec![0usize; k - 1];
            loop {
                let free: f64 = idx.iter().map(|&i| g[i]).sum();
                if free <= 1.0 + 1e-12 {
                    let mut p: Vec<f64> = idx.iter().map(|&i| g[i]).collect();
                    p.push((1.0 - free).max(0.0));
                    out.push(p);
                }
                // Odometer over the free coordinates.
                let mut pos = 0;
                loop {
                    if pos == idx.len() {
                        return out;
                    }
                    idx[pos] += 1;
                    if idx[pos] < g.len() {
                        break;
                    }
                    idx[pos] = 0;
                    pos += 1;
                }
            }
        }
    }
}

/// Local search offsets over `c` free coordinates: every nonzero vector in
/// `{-2..=2}^c` up to five coordinates, `{-1, 0, 1}^c` up to seven, else
/// single and paired coordinate moves.
fn directions(c: usize) -> Vec<Vec<i8>> {
    let radius: i8 = match c {
        0..=5 => 2,
        6..=7 => 1,
        _ => 0,
    };
    let mut out = Vec::new();
    if radius > 0 {
        let width = 2 * radius as usize + 1;
        for code in 0..width.pow(c as u32) {
            let mut v = Vec::with_capacity(c);
            let mut x = code;
            for _ in 0..c {
                v.push((x % width) as i8 - radius);
                x /= width;
            }
            if v.iter().any(|&d| d != 0) {
                out.push(v);
            }
        }
    } else {
        for i in 0..c {
            for si in [-1i8, 1] {
                let mut v = vec![0i8; c];
                v[i] = si;
                out.push(v.clone());
                for j in i + 1..c {
                    for sj in [-1i8, 1] {
                        let mut w = v.clone();
                        w[j] = sj;
                        out.push(w);
                    }
                }
            }
        }
    }
    out
}

/// Exhaustive grid search followed by a shrinking pattern search.
///
/// The grid covers the free coordinates of every simplex group (the last
/// coordinate takes the remainder) and `[0, 1]` for ungrouped variables.
/// The best grid point is refined with moves that keep every group on its
/// simplex, starting at `grid_step / 10` and halving whenever no move helps.
/// Moves combine several free coordinates, with unequal step multiples, so
/// the search can slide along kinks that couple variables.
pub fn brute_force_infer(mrf: &Mrf, grid_step: f64) -> Result<InferenceResult> {
    let n = mrf.num_vars();
    if n > MAX_BRUTE_FORCE_VARIABLES {
        return Err(Error::TooManyVariables(n, MAX_BRUTE_FORCE_VARIABLES));
    }
    if !(grid_step > 0.0 && grid_step <= 0.5) {
        return Err(Error::Config(format!("grid step must be in (0, 0.5], got {grid_step}")));
    }

    let mut grouped = vec![false; n];
    let mut blocks = Vec::new();
    for c in &mrf.constraints {
        c.vars.iter().for_each(|&i| grouped[i] = true);
        blocks.push(Block::Simplex(c.vars.clone()));
    }
    blocks.extend((0..n).filter(|&i| !grouped[i]).map(Block::Free));

    let g = grid(grid_step);
    let points: Vec<Vec<Vec<f64>>> = blocks.iter().map(|b| block_points(b, &g)).collect();
    let vars_of = |b: &Block| -> Vec<usize> {
        match b {
            Block::Simplex(v) => v.clone(),
            Block::Free(i) => vec![*i],
        }
    };
    let block_vars: Vec<Vec<usize>> = blocks.iter().map(vars_of).collect();

    let mut y = mrf.uniform_point();
    let mut best = y.clone();
    let mut best_val = f64::INFINITY;
    let mut choice = vec![0usize; blocks.len()];
    'grid: loop {
        for (b, &c) in choice.iter().enumerate() {
            for (&i, &v) in block_vars[b].iter().zip(&points[b][c]) {
                y[i] = v;
            }
        }
        let e = mrf.energy(&y);
        if e < best_val {
            best_val = e;
            best.copy_from_slice(&y);
        }
        let mut pos = 0;
        loop {
            if pos == choice.len() {
                break 'grid;
            }
            choice[pos] += 1;
            if choice[pos] < points[pos].len() {
                break;
            }
            choice[pos] = 0;
            pos += 1;
        }
    }

    // Refinement moves in free coordinates: the first k − 1 variables of a
    // group move and the last absorbs the difference.
    let mut coords: Vec<(usize, Option<usize>)> = Vec::new();
    for b in &blocks {
        match b {
            Block::Free(i) => coords.push((*i, None)),
            Block::Simplex(vars) => {
                let last = *vars.last().expect("non-empty group");
                coords.extend(vars[..vars.len() - 1].iter().map(|&i| (i, Some(last))));
            }
        }
    }
    let moves = directions(coords.len());

    let mut step = grid_step / 10.0;
    let mut iterations = 0;
    while step > 1e-9 {
        let mut improved = true;
        while improved {
            improved = false;
            for mv in &moves {
                y.copy_from_slice(&best);
                for (&(i, last), &d) in coords.iter().zip(mv) {
                    if d != 0 {
                        let delta = f64::from(d) * step;
                        y[i] += delta;
                        if let Some(l) = last {
                            y[l] -= delta;
                        }
                    }
                }
                if y.iter().any(|v| !(0.0..=1.0).contains(v)) {
                    continue;
                }
                iterations += 1;
                let e = mrf.energy(&y);
                if e < best_val - 1e-15 {
                    best_val = e;
                    best.copy_from_slice(&y);
                    improved = true;
                }
            }
        }
        step /= 2.0;
    }

    Ok(InferenceResult {
        values: best,
        objective: best_val.max(0.0),
        iterations,
        primal_residual: 0.0,
        dual_residual: 0.0,
        converged: true,
    })
}
