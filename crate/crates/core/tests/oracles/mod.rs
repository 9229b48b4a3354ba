//! Slow, direct reference implementations used as test oracles.
#![allow(dead_code)]

use std::collections::HashMap;

/// Minimum cost over every edit script, enumerated explicitly. Costs along a
/// script are summed in path order.
pub fn brute_force_om(x: &[usize], y: &[usize], sub: &dyn Fn(usize, usize) -> f64, del: &[f64], ins: &[f64]) -> f64 {
    fn walk(
        i: usize,
        j: usize,
        acc: f64,
        x: &[usize],
        y: &[usize],
        sub: &dyn Fn(usize, usize) -> f64,
        del: &[f64],
        ins: &[f64],
        best: &mut f64,
    ) {
        if i == x.len() && j == y.len() {
            if acc < *best {
                *best = acc;
            }
            return;
        }
        if i < x.len() && j < y.len() {
            walk(i + 1, j + 1, acc + sub(x[i], y[j]), x, y, sub, del, ins, best);
        }
        if i < x.len() {
            walk(i + 1, j, acc + del[i], x, y, sub, del, ins, best);
        }
        if j < y.len() {
            walk(i, j + 1, acc + ins[j], x, y, sub, del, ins, best);
        }
    }
    let mut best = f64::INFINITY;
    walk(0, 0, 0.0, x, y, sub, del, ins, &mut best);
    best
}

/// Localized indel cost of each element, neighbours taken from its own sequence.
pub fn localized_indels(seq: &[usize], sub: &dyn Fn(usize, usize) -> f64, gamma_max: f64, e: f64, g: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for p in 0..seq.len() {
        let u = seq[p];
        let left = if p == 0 { gamma_max } else { sub(seq[p - 1], u) };
        let right = if p + 1 == seq.len() { gamma_max } else { sub(seq[p + 1], u) };
        out.push(e * gamma_max + g * (left + right) / 2.0);
    }
    out
}

#[derive(Debug, Clone, Copy)]
pub struct Pairs {
    pub n11: f64,
    pub n10: f64,
    pub n01: f64,
    pub n00: f64,
}

/// Classifies every case pair; `n10` is together in `y` only, `n01` together in `x` only.
pub fn classify_pairs(x: &[usize], y: &[usize], w: &[f64]) -> Pairs {
    let mut p = Pairs { n11: 0.0, n10: 0.0, n01: 0.0, n00: 0.0 };
    for i in 0..x.len() {
        for j in 0..i {
            let pw = w[i] * w[j];
            match (x[i] == x[j], y[i] == y[j]) {
                (true, true) => p.n11 += pw,
                (false, true) => p.n10 += pw,
                (true, false) => p.n01 += pw,
                (false, false) => p.n00 += pw,
            }
        }
    }
    p
}

pub fn ari_from_pairs(p: Pairs) -> f64 {
    let denom = (p.n00 + p.n01) * (p.n01 + p.n11) + (p.n00 + p.n10) * (p.n10 + p.n11);
    2.0 * (p.n00 * p.n11 - p.n01 * p.n10) / denom
}

pub fn fms_from_pairs(p: Pairs) -> f64 {
    if p.n11 == 0.0 {
        return 0.0;
    }
    (p.n11 / (p.n11 + p.n10) * p.n11 / (p.n11 + p.n01)).sqrt()
}

fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

fn tally(labels: &[usize]) -> HashMap<usize, u64> {
    let mut m = HashMap::new();
    for &l in labels {
        *m.entry(l).or_insert(0) += 1;
    }
    m
}

/// AMI of two unit-weight labelings, with the expected mutual information
/// summed over the hypergeometric support using exact binomial coefficients.
pub fn ami_oracle(x: &[usize], y: &[usize]) -> f64 {
    let n = x.len() as u64;
    let nf = n as f64;
    let a = tally(x);
    let b = tally(y);
    let mut joint: HashMap<(usize, usize), u64> = HashMap::new();
    for (&i, &j) in x.iter().zip(y) {
        *joint.entry((i, j)).or_insert(0) += 1;
    }
    let h = |t: &HashMap<usize, u64>| -> f64 {
        t.values()
            .map(|&c| {
                let p = c as f64 / nf;
                -p * p.ln()
            })
            .sum()
    };
    let mi: f64 = joint
        .iter()
        .map(|(&(i, j), &c)| {
            let c = c as f64;
            c / nf * (nf * c / (a[&i] as f64 * b[&j] as f64)).ln()
        })
        .sum();
    let mut emi = 0.0;
    for &ai in a.values() {
        for &bj in b.values() {
            let total = binomial(n, ai) as f64;
            for k in 1..=ai.min(bj) {
                let ways = binomial(bj, k) * binomial(n - bj, ai - k);
                if ways == 0 {
                    continue;
                }
                let prob = ways as f64 / total;
                let kf = k as f64;
                emi += prob * kf / nf * (nf * kf / (ai as f64 * bj as f64)).ln();
            }
        }
    }
    let ha = h(&a);
    let hb = h(&b);
    (mi - emi) / (ha.max(hb) - emi)
}

/// Lowest weighted objective over every `k`-subset of medoids.
pub fn best_medoid_objective(d: &dyn Fn(usize, usize) -> f64, w: &[f64], k: usize) -> f64 {
    fn rec(start: usize, chosen: &mut Vec<usize>, k: usize, n: usize, d: &dyn Fn(usize, usize) -> f64, w: &[f64], best: &mut f64) {
        if chosen.len() == k {
            let obj: f64 = (0..n)
                .map(|i| w[i] * chosen.iter().map(|&m| d(i, m)).fold(f64::INFINITY, f64::min))
                .sum();
            if obj < *best {
                *best = obj;
            }
            return;
        }
        for c in start..n {
            chosen.push(c);
            rec(c + 1, chosen, k, n, d, w, best);
            chosen.pop();
        }
    }
    let mut best = f64::INFINITY;
    rec(0, &mut Vec::new(), k, w.len(), d, w, &mut best);
    best
}

pub fn asw_oracle(d: &dyn Fn(usize, usize) -> f64, w: &[f64], labels: &[usize], k: usize) -> f64 {
    let n = w.len();
    let mut num = 0.0;
    for i in 0..n {
        let mut sums = vec![0.0; k];
        let mut weights = vec![0.0; k];
        for j in 0..n {
            if j != i {
                sums[labels[j]] += w[j] * d(i, j);
                weights[labels[j]] += w[j];
            }
        }
        let own = labels[i];
        if weights[own] == 0.0 {
            continue;
        }
        let a = sums[own] / weights[own];
        let mut b = f64::INFINITY;
        for c in 0..k {
            if c != own {
                let wc = weights[c];
                b = b.min(sums[c] / wc);
            }
        }
        let s = if a.max(b) > 0.0 { (b - a) / a.max(b) } else { 0.0 };
        num += w[i] * s;
    }
    num / w.iter().sum::<f64>()
}

fn pair_list(d: &dyn Fn(usize, usize) -> f64, w: &[f64], labels: &[usize]) -> Vec<(f64, f64, bool)> {
    let mut v = Vec::new();
    for i in 0..w.len() {
        for j in 0..i {
            v.push((d(i, j), w[i] * w[j], labels[i] != labels[j]));
        }
    }
    v
}

/// Weighted gamma by comparing every within pair with every between pair.
pub fn hg_oracle(d: &dyn Fn(usize, usize) -> f64, w: &[f64], labels: &[usize]) -> f64 {
    let pairs = pair_list(d, w, labels);
    let (mut c, mut dis) = (0.0, 0.0);
    for &(dw, ww, bw) in &pairs {
        if bw {
            continue;
        }
        for &(db, wb, bb) in &pairs {
            if !bb {
                continue;
            }
            if dw < db {
                c += ww * wb;
            } else if dw > db {
                dis += ww * wb;
            }
        }
    }
    if c + dis == 0.0 {
        0.0
    } else {
        (c - dis) / (c + dis)
    }
}

pub fn pbc_oracle(d: &dyn Fn(usize, usize) -> f64, w: &[f64], labels: &[usize]) -> f64 {
    let pairs = pair_list(d, w, labels);
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    let md = pairs.iter().map(|p| p.1 * p.0).sum::<f64>() / total;
    let mb = pairs.iter().map(|p| p.1 * if p.2 { 1.0 } else { 0.0 }).sum::<f64>() / total;
    let (mut cov, mut vd, mut vb) = (0.0, 0.0, 0.0);
    for &(dist, pw, between) in &pairs {
        let b = if between { 1.0 } else { 0.0 };
        cov += pw * (dist - md) * (b - mb);
        vd += pw * (dist - md).powi(2);
        vb += pw * (b - mb).powi(2);
    }
    if vd == 0.0 || vb == 0.0 {
        0.0
    } else {
        cov / (vd * vb).sqrt()
    }
}

/// Unit-weight Hubert's C: within-cluster sum against the sums of the
/// smallest and largest pair distances of the same count.
pub fn hc_unit_oracle(d: &dyn Fn(usize, usize) -> f64, n: usize, labels: &[usize]) -> f64 {
    let mut all = Vec::new();
    let mut s = 0.0;
    let mut within = 0;
    for i in 0..n {
        for j in 0..i {
            all.push(d(i, j));
            if labels[i] == labels[j] {
                s += d(i, j);
                within += 1;
            }
        }
    }
    all.sort_by(f64::total_cmp);
    let smin: f64 = all[..within].iter().sum();
    let smax: f64 = all[all.len() - within..].iter().sum();
    if smax == smin {
        0.0
    } else {
        (s - smin) / (smax - smin)
    }
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx.sqrt() * syy.sqrt())
}
