//! Brute-force reference implementations, written without looking at the
//! library code paths they check: count every n-gram by scanning all
//! windows, and align by trying reference positions one at a time.

/// Clipped n-gram precision by enumerating windows pairwise.
pub fn precision(pred: &[&str], reference: &[&str], n: usize) -> f64 {
    if pred.len() < n {
        return 0.0;
    }
    let pw: Vec<&[&str]> = pred.windows(n).collect();
    let rw: Vec<&[&str]> = if reference.len() >= n { reference.windows(n).collect() } else { vec![] };
    let mut clipped = 0usize;
    let mut done: Vec<&[&str]> = Vec::new();
    for g in &pw {
        if done.contains(g) {
            continue;
        }
        done.push(g);
        let in_pred = pw.iter().filter(|x| *x == g).count();
        let in_ref = rw.iter().filter(|x| *x == g).count();
        clipped += in_pred.min(in_ref);
    }
    clipped as f64 / pw.len() as f64
}

/// BLEU with uniform weights over the effective orders.
pub fn bleu(pred: &[&str], reference: &[&str], max_order: usize) -> f64 {
    if pred.is_empty() {
        return 0.0;
    }
    let orders = max_order.min(pred.len());
    let mut log_sum = 0.0;
    for n in 1..=orders {
        let p = precision(pred, reference, n);
        if p == 0.0 {
            return 0.0;
        }
        log_sum += p.ln() / orders as f64;
    }
    let brevity = (pred.len() as f64 / reference.len() as f64).min(1.0);
    brevity * log_sum.exp()
}

/// (matches, chunks) for greedy earliest-unused alignment.
pub fn align(pred: &[&str], reference: &[&str]) -> (usize, usize) {
    let mut used = vec![false; reference.len()];
    let mut pairs = Vec::new();
    for (i, p) in pred.iter().enumerate() {
        for j in 0..reference.len() {
            if !used[j] && reference[j] == *p {
                used[j] = true;
                pairs.push((i, j));
                break;
            }
        }
    }
    let mut chunks = 0;
    for k in 0..pairs.len() {
        let continues = k > 0 && pairs[k].0 == pairs[k - 1].0 + 1 && pairs[k].1 == pairs[k - 1].1 + 1;
        if !continues {
            chunks += 1;
        }
    }
    (pairs.len(), chunks)
}

/// METEOR with the default parameters (alpha 0.9, gamma 0.5, beta 3).
pub fn meteor(pred: &[&str], reference: &[&str]) -> f64 {
    let (m, ch) = align(pred, reference);
    if m == 0 {
        return 0.0;
    }
    let p = m as f64 / pred.len() as f64;
    let r = m as f64 / reference.len() as f64;
    let fmean = p * r / (0.9 * r + 0.1 * p);
    let penalty = 0.5 * (ch as f64 / m as f64).powi(3);
    ((1.0 - penalty) * fmean).clamp(0.0, 1.0)
}
