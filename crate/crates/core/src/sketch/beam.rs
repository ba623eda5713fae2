//! Length-bounded beam search over any stepwise token model.

use std::cmp::Ordering;

/// A left-to-right token model.
pub trait StepModel {
    type State: Clone;
    type Error;

    fn vocab_size(&self) -> usize;
    fn end_token(&self) -> usize;
    fn start(&self) -> Self::State;
    /// Log-probabilities of the next token, plus the state after reading
    /// the current input.
    fn next(&self, state: &Self::State) -> Result<(Vec<f64>, Self::State), Self::Error>;
    /// Feeds the emitted token back in as the next input.
    fn feed(&self, state: Self::State, token: usize) -> Self::State;
    /// Whether `token` may follow `prefix`.
    fn allowed(&self, _prefix: &[usize], _token: usize) -> bool {
        true
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    /// Emitted tokens without the end token.
    pub tokens: Vec<usize>,
    pub log_prob: f64,
    /// False when the length bound cut the sequence off.
    pub finished: bool,
}

fn rank(a: (f64, &[usize]), b: (f64, &[usize])) -> Ordering {
    b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1))
}

/// Keeps the `beam` best expansions at every step; hypotheses that emit the
/// end token leave the beam. Finished hypotheses come first, ordered by
/// score (ties broken by token ids), then truncated ones.
pub fn beam_search<M: StepModel>(model: &M, beam: usize, max_len: usize) -> Result<Vec<Hypothesis>, M::Error> {
    assert!(beam >= 1, "beam must be at least 1");
    let end = model.end_token();
    let mut active: Vec<(Vec<usize>, f64, M::State)> = vec![(Vec::new(), 0.0, model.start())];
    let mut done: Vec<Hypothesis> = Vec::new();
    for _ in 0..max_len {
        let mut cands: Vec<(f64, Vec<usize>, usize)> = Vec::new();
        let mut states = Vec::with_capacity(active.len());
        for (i, (prefix, lp, state)) in active.iter().enumerate() {
            let (logp, next) = model.next(state)?;
            states.push(next);
            for (tok, &l) in logp.iter().enumerate() {
                if l.is_finite() && model.allowed(prefix, tok) {
                    let mut seq = prefix.clone();
                    seq.push(tok);
                    cands.push((lp + l, seq, i));
                }
            }
        }
        cands.sort_by(|a, b| rank((a.0, &a.1), (b.0, &b.1)));
        cands.truncate(beam);
        let mut next_active = Vec::new();
        for (score, mut seq, parent) in cands {
            let tok = *seq.last().expect("non-empty");
            if tok == end {
                seq.pop();
                done.push(Hypothesis { tokens: seq, log_prob: score, finished: true });
            } else {
                let state = model.feed(states[parent].clone(), tok);
                next_active.push((seq, score, state));
            }
        }
        active = next_active;
        if active.is_empty() {
            break;
        }
    }
    done.sort_by(|a, b| rank((a.log_prob, &a.tokens), (b.log_prob, &b.tokens)));
    let mut cut: Vec<Hypothesis> =
        active.into_iter().map(|(tokens, log_prob, _)| Hypothesis { tokens, log_prob, finished: false }).collect();
    cut.sort_by(|a, b| rank((a.log_prob, &a.tokens), (b.log_prob, &b.tokens)));
    done.extend(cut);
    done.truncate(beam);
    Ok(done)
}

/// Argmax chain; ties go to the lowest token index.
pub fn greedy<M: StepModel>(model: &M, max_len: usize) -> Result<Hypothesis, M::Error> {
    let end = model.end_token();
    let mut state = model.start();
    let mut tokens = Vec::new();
    let mut total = 0.0;
    for _ in 0..max_len {
        let (logp, next) = model.next(&state)?;
        let mut best: Option<(usize, f64)> = None;
        for (tok, &l) in logp.iter().enumerate() {
            if l.is_finite() && model.allowed(&tokens, tok) && best.is_none_or(|(_, b)| l > b) {
                best = Some((tok, l));
            }
        }
        let Some((tok, l)) = best else { break };
        total += l;
        if tok == end {
            return Ok(Hypothesis { tokens, log_prob: total, finished: true });
        }
        tokens.push(tok);
        state = model.feed(next, tok);
    }
    Ok(Hypothesis { tokens, log_prob: total, finished: false })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Three tokens (a, b, END) with prefix-dependent probabilities.
    struct Toy;

    impl StepModel for Toy {
        type State = Vec<usize>;
        type Error = ();

        fn vocab_size(&self) -> usize {
            3
        }
        fn end_token(&self) -> usize {
            2
        }
        fn start(&self) -> Vec<usize> {
            Vec::new()
        }
        fn next(&self, s: &Vec<usize>) -> Result<(Vec<f64>, Vec<usize>), ()> {
            let p: [f64; 3] = match s.as_slice() {
                [] => [0.5, 0.15, 0.35],
                [0] => [0.1, 0.5, 0.4],
                [1] => [0.6, 0.1, 0.3],
                [0, 0] => [0.3, 0.3, 0.4],
                [0, 1] => [0.2, 0.1, 0.7],
                [1, 0] => [0.1, 0.1, 0.8],
                [1, 1] => [0.5, 0.4, 0.1],
                _ => [0.25, 0.25, 0.5],
            };
            Ok((p.iter().map(|x| x.ln()).collect(), s.clone()))
        }
        fn feed(&self, mut s: Vec<usize>, t: usize) -> Vec<usize> {
            s.push(t);
            s
        }
    }

    fn enumerate(max_len: usize) -> Vec<Hypothesis> {
        let mut out = Vec::new();
        let mut stack = vec![(Vec::new(), 0.0)];
        while let Some((prefix, lp)) = stack.pop() {
            let (logp, _) = Toy.next(&prefix).unwrap();
            out.push(Hypothesis { tokens: prefix.clone(), log_prob: lp + logp[2], finished: true });
            if prefix.len() + 1 < max_len {
                for t in 0..2 {
                    let mut p = prefix.clone();
                    p.push(t);
                    stack.push((p, lp + logp[t]));
                }
            }
        }
        out.sort_by(|a, b| rank((a.log_prob, &a.tokens), (b.log_prob, &b.tokens)));
        out
    }

    #[test]
    fn beam_two_matches_exhaustive_enumeration() {
        let all = enumerate(4);
        let got = beam_search(&Toy, 2, 4).unwrap();
        assert_eq!(got.len(), 2);
        for (g, e) in got.iter().zip(&all) {
            assert_eq!(g.tokens, e.tokens);
            assert!((g.log_prob - e.log_prob).abs() < 1e-12);
        }
    }

    #[test]
    fn beam_one_is_greedy() {
        for max_len in 1..5 {
            let b = beam_search(&Toy, 1, max_len).unwrap();
            let g = greedy(&Toy, max_len).unwrap();
            assert_eq!(b, vec![g]);
        }
    }

    #[test]
    fn scores_strictly_ordered_and_bounded() {
        for beam in 1..6 {
            let got = beam_search(&Toy, beam, 4).unwrap();
            assert!(got.len() <= beam);
            for w in got.windows(2) {
                assert!(rank((w[0].log_prob, &w[0].tokens), (w[1].log_prob, &w[1].tokens)) == Ordering::Less);
            }
        }
    }

    #[test]
    fn length_bound_truncates() {
        let g = greedy(&Toy, 1).unwrap();
        assert_eq!(g.tokens, vec![0]);
        assert!(!g.finished);
    }
}
