//! Grid navigation with walls. The agent starts on a uniformly drawn free
//! non-goal cell and is paid 1 for reaching `G`, which ends the episode.
//! Moving into a wall leaves the agent in place. Observations are a one-hot
//! encoding over the free cells (goal included), in row-major order.

use super::{ActionSpace, EnvSpec};
use crate::rng::Stream;

pub const MAZE_ROWS: [&str; 7] = [
    "#######",
    "#.....#",
    "#.##..#",
    "#...#.#",
    "##.#..#",
    "#...#G#",
    "#######",
];
const MAX_STEPS: u32 = 40;
/// up, right, down, left
const MOVES: [(i64, i64); 4] = [(-1, 0), (0, 1), (1, 0), (0, -1)];

fn cell(r: usize, c: usize) -> u8 {
    MAZE_ROWS[r].as_bytes()[c]
}

/// Free cells (goal included) in row-major order.
pub(crate) fn free_cells() -> Vec<(usize, usize)> {
    let mut v = Vec::new();
    for (r, row) in MAZE_ROWS.iter().enumerate() {
        for (c, ch) in row.bytes().enumerate() {
            if ch != b'#' {
                v.push((r, c));
            }
        }
    }
    v
}

/// Cells a reset may place the agent on.
pub(crate) fn start_cells() -> Vec<(usize, usize)> {
    free_cells().into_iter().filter(|&(r, c)| cell(r, c) != b'G').collect()
}

pub(super) fn spec() -> EnvSpec {
    EnvSpec {
        id: "maze-grid".into(),
        obs_dim: free_cells().len(),
        action_space: ActionSpace::Discrete { n: 4 },
        max_episode_steps: MAX_STEPS,
        reward_range_hint: (0.0, 1.0),
    }
}

/// Internal state is `[row, col]`.
pub(super) fn reset(rng: &mut Stream) -> Vec<f64> {
    let starts = start_cells();
    let (r, c) = starts[rng.below(starts.len() as u64) as usize];
    vec![r as f64, c as f64]
}

pub(super) fn observe(s: &[f64]) -> Vec<f64> {
    let cells = free_cells();
    let pos = (s[0] as usize, s[1] as usize);
    cells.iter().map(|&p| if p == pos { 1.0 } else { 0.0 }).collect()
}

pub(super) fn step(s: &mut [f64], action: usize) -> (f64, bool) {
    let (dr, dc) = MOVES[action];
    let r = (s[0] as i64 + dr) as usize;
    let c = (s[1] as i64 + dc) as usize;
    if cell(r, c) == b'#' {
        return (0.0, false);
    }
    s[0] = r as f64;
    s[1] = c as f64;
    if cell(r, c) == b'G' {
        (1.0, true)
    } else {
        (0.0, false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Env;

    #[test]
    fn wall_bump_is_a_no_op() {
        let e = Env::make("maze-grid").unwrap();
        let (mut s, _) = e.reset(0);
        s.internal = vec![1.0, 1.0];
        // up and left are walls from (1,1)
        for a in [0.0, 3.0] {
            let st = e.step(&s, &[a]).unwrap();
            assert_eq!(st.state.internal, vec![1.0, 1.0]);
            assert_eq!(st.reward, 0.0);
            assert!(!st.terminated);
        }
    }

    #[test]
    fn goal_pays_and_terminates() {
        let e = Env::make("maze-grid").unwrap();
        let (mut s, _) = e.reset(0);
        s.internal = vec![4.0, 5.0];
        let st = e.step(&s, &[2.0]).unwrap();
        assert_eq!(st.reward, 1.0);
        assert!(st.terminated);
    }

    #[test]
    fn goal_reachable_from_every_start() {
        // breadth-first search over the grid
        let goal = free_cells().into_iter().find(|&(r, c)| cell(r, c) == b'G').unwrap();
        let mut dist = std::collections::HashMap::new();
        dist.insert(goal, 0u32);
        let mut queue = std::collections::VecDeque::from([goal]);
        while let Some((r, c)) = queue.pop_front() {
            for (dr, dc) in MOVES {
                let n = ((r as i64 + dr) as usize, (c as i64 + dc) as usize);
                if cell(n.0, n.1) != b'#' && !dist.contains_key(&n) {
                    dist.insert(n, dist[&(r, c)] + 1);
                    queue.push_back(n);
                }
            }
        }
        for s in start_cells() {
            assert!(dist[&s] < MAX_STEPS, "{s:?}");
        }
    }

    #[test]
    fn reset_is_uniform_over_start_cells() {
        // Chi-square goodness of fit over 10^4 resets.
        let e = Env::make("maze-grid").unwrap();
        let starts = start_cells();
        let k = starts.len();
        let mut counts = vec![0usize; k];
        let n = 10_000;
        for seed in 0..n {
            let (s, _) = e.reset(seed as u64);
            let pos = (s.internal[0] as usize, s.internal[1] as usize);
            counts[starts.iter().position(|&p| p == pos).unwrap()] += 1;
        }
        let expected = n as f64 / k as f64;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // k = 18 cells -> 17 dof; 0.999 quantile of chi^2(17) is 40.79.
        assert_eq!(k, 18);
        assert!(chi2 < 40.79, "chi2 = {chi2}");
    }
}
