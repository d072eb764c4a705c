use copsym::dgp::{factor_copula_sample, FactorDgpSpec};
use copsym::matrix::Matrix;
use copsym::pseudoobs::{normalized_ranks, PseudoSample};
use copsym::rng::{mix_seed, stream_rng};
use copsym::symmetry_test::*;
use rand::Rng;

fn replicate(x: &Matrix, seed: u64, rep: u64, reflect: bool, recenter: bool) -> f64 {
    let t = x.rows();
    let n = x.cols();
    let l = auto_block_length(t).unwrap();
    let n_blocks = t - l + 1;
    let n_draws = t.div_ceil(l);
    let mut rng = stream_rng(seed, rep);
    let draws: Vec<usize> = (0..n_draws).map(|_| rng.random_range(0..n_blocks)).collect();
    let coins: Vec<bool> = if reflect {
        (0..n_draws).map(|_| rng.random::<f64>() < 0.5).collect()
    } else {
        vec![false; n_draws]
    };
    let mut rows = Vec::with_capacity(t);
    let mut flip = Vec::with_capacity(t);
    'outer: for (d, &b) in draws.iter().enumerate() {
        for r in b..b + l {
            if rows.len() == t { break 'outer; }
            rows.push(r);
            flip.push(coins[d]);
        }
    }
    let data: Vec<f64> = rows.iter().flat_map(|&r| x.row(r).to_vec()).collect();
    let resampled = Matrix::from_vec(t, n, data);
    let u_star = normalized_ranks(&resampled).unwrap();
    let d1 = u_star.denom();
    let mut ranks: Vec<u32> = Vec::with_capacity(t * n);
    for a in 0..t {
        for i in 0..n {
            let k = (u_star.value(a, i) * d1 as f64).round() as u32;
            ranks.push(if flip[a] { d1 - k } else { k });
        }
    }
    let maybe_reflected = PseudoSample::from_ranks(ranks, d1, t, n).unwrap();
    let etas: Vec<f64> = (0..t).map(|_| rng.random::<f64>()).collect();
    let v = tie_break_with_etas(&maybe_reflected.values(), &etas);
    if !recenter {
        return bootstrap_statistic(&v).unwrap();
    }
    // recentered: subtract original-sample Delta at the V points (integer cross-denominator)
    let orig = normalized_ranks(x).unwrap();
    let d1o = orig.denom() as u64;
    let d2 = v.denom() as u64;
    let ko: Vec<Vec<u64>> = (0..t)
        .map(|s| (0..n).map(|i| (orig.value(s, i) * d1o as f64).round() as u64).collect())
        .collect();
    let kv: Vec<Vec<u64>> = (0..t)
        .map(|s| (0..n).map(|i| (v.value(s, i) * d2 as f64).round() as u64).collect())
        .collect();
    let tf = t as f64;
    let mut acc = 0.0;
    for a in 0..t {
        let at = &kv[a];
        let (mut cs, mut cbs, mut co, mut cbo) = (0i64, 0i64, 0i64, 0i64);
        for s in 0..t {
            if kv[s].iter().zip(at).all(|(k, p)| k <= p) { cs += 1; }
            if kv[s].iter().zip(at).all(|(k, p)| d2 - k <= *p) { cbs += 1; }
            if ko[s].iter().zip(at).all(|(j, p)| j * d2 <= p * d1o) { co += 1; }
            if ko[s].iter().zip(at).all(|(j, p)| (d1o - j) * d2 <= p * d1o) { cbo += 1; }
        }
        let diff = ((cs - cbs) - (co - cbo)) as f64 / tf;
        acc += diff * diff;
    }
    acc / tf
}

fn experiment(gamma: f64, t: usize, n: usize, m: usize, reps: usize, reflect: bool, recenter: bool, label: &str) {
    let mut rej = [0usize; 3];
    for r in 0..reps {
        let spec = FactorDgpSpec::with_defaults(n, t, gamma, mix_seed(6000, 2 * r as u64));
        let x = factor_copula_sample(&spec).unwrap();
        let s_t = cvm_statistic(&normalized_ranks(&x).unwrap()).unwrap();
        let seed = mix_seed(6000, 2 * r as u64 + 1);
        let mut above = 0usize;
        for rep in 0..m {
            if replicate(&x, seed, rep as u64, reflect, recenter) > s_t { above += 1; }
        }
        let p = above as f64 / m as f64;
        for (i, q) in [0.01, 0.05, 0.10].iter().enumerate() {
            if p <= *q { rej[i] += 1; }
        }
    }
    println!("{label}: rej@(1,5,10)% = ({:.3}, {:.3}, {:.3})",
        rej[0] as f64 / reps as f64, rej[1] as f64 / reps as f64, rej[2] as f64 / reps as f64);
}

fn main() {
    let (t, n, m, reps) = (250, 6, 250, 100);
    experiment(0.0, t, n, m, reps, true, false, "V4 reflect   T=250 N=6 g= 0.0");
    experiment(-0.4, t, n, m, reps, true, false, "V4 reflect   T=250 N=6 g=-0.4");
    experiment(-0.8, t, n, m, reps, true, false, "V4 reflect   T=250 N=6 g=-0.8");
    experiment(0.0, t, n, m, reps, false, true, "V2 recenter  T=250 N=6 g= 0.0");
    experiment(-0.4, t, n, m, reps, false, true, "V2 recenter  T=250 N=6 g=-0.4");
    experiment(-0.8, t, n, m, reps, false, true, "V2 recenter  T=250 N=6 g=-0.8");
}
