//! High-precision reference evaluation of the key-length formulas.
//!
//! Works entirely in 256-bit binary floating point and shares no code with
//! the library so it can serve as an independent check.

use astro_float::{BigFloat, Consts, RoundingMode};

const P: usize = 256;
const RM: RoundingMode = RoundingMode::ToEven;

pub struct Oracle {
    cc: Consts,
}

fn big(x: f64) -> BigFloat {
    BigFloat::from_f64(x, P)
}

fn to_f64(x: &BigFloat) -> f64 {
    format!("{x}").parse().expect("BigFloat prints a decimal literal")
}

impl Oracle {
    pub fn new() -> Self {
        Oracle {
            cc: Consts::new().expect("constant cache"),
        }
    }

    fn ln(&mut self, x: &BigFloat) -> BigFloat {
        x.ln(P, RM, &mut self.cc)
    }

    fn log2(&mut self, x: &BigFloat) -> BigFloat {
        x.log2(P, RM, &mut self.cc)
    }

    fn entropy_big(&mut self, x: &BigFloat) -> BigFloat {
        let zero = big(0.0);
        let one = big(1.0);
        if x.cmp(&zero).unwrap_or(0) <= 0 || x.cmp(&one).unwrap_or(0) >= 0 {
            return zero;
        }
        let comp = one.sub(x, P, RM);
        let a = x.mul(&self.log2(x), P, RM);
        let b = comp.mul(&self.log2(&comp), P, RM);
        a.add(&b, P, RM).neg()
    }

    pub fn entropy(&mut self, x: f64) -> f64 {
        let v = self.entropy_big(&big(x));
        to_f64(&v)
    }

    fn mu_big(&mut self, n: u64, m: u64, eps_sec: f64) -> BigFloat {
        let nb = BigFloat::from_u64(n, P);
        let mb = BigFloat::from_u64(m, P);
        let num = nb.add(&mb, P, RM).mul(&mb.add(&big(1.0), P, RM), P, RM);
        let den = nb.mul(&mb, P, RM).mul(&mb, P, RM);
        let ln_term = self.ln(&big(2.0).div(&big(eps_sec), P, RM));
        num.div(&den, P, RM).mul(&ln_term, P, RM).sqrt(P, RM)
    }

    pub fn mu(&mut self, n: u64, m: u64, eps_sec: f64) -> f64 {
        let v = self.mu_big(n, m, eps_sec);
        to_f64(&v)
    }

    /// Unclamped `n(1 - h(Q+mu)) - n h(Q+mu) - log2(2/(eps_sec^2 eps_cor))`
    /// with `Q + mu` saturated at one half.
    pub fn raw_key_length(&mut self, n: u64, m: u64, qber: f64, eps_sec: f64, eps_cor: f64) -> f64 {
        let mu = self.mu_big(n, m, eps_sec);
        let mut eff = big(qber).add(&mu, P, RM);
        let half = big(0.5);
        if eff.cmp(&half).unwrap_or(0) > 0 {
            eff = half;
        }
        let h = self.entropy_big(&eff);
        let nb = BigFloat::from_u64(n, P);
        let one = big(1.0);
        let kept = nb.mul(&one.sub(&h, P, RM), P, RM);
        let leak = nb.mul(&h, P, RM);
        let es = big(eps_sec);
        let denom = es.mul(&es, P, RM).mul(&big(eps_cor), P, RM);
        let cost = self.log2(&big(2.0).div(&denom, P, RM));
        to_f64(&kept.sub(&leak, P, RM).sub(&cost, P, RM))
    }

    fn rate_big(&mut self, qber: f64) -> BigFloat {
        let h = self.entropy_big(&big(qber));
        let r = big(1.0).sub(&big(2.0).mul(&h, P, RM), P, RM);
        if r.cmp(&big(0.0)).unwrap_or(0) < 0 {
            big(0.0)
        } else {
            r
        }
    }

    pub fn asymptotic_rate(&mut self, qber: f64) -> f64 {
        let r = self.rate_big(qber);
        to_f64(&r)
    }

    pub fn asymptotic_block_rate(&mut self, fractions: &[(f64, f64)]) -> f64 {
        let mut total = big(0.0);
        for &(p, q) in fractions {
            let r = self.rate_big(q);
            total = total.add(&big(p).mul(&r, P, RM), P, RM);
        }
        to_f64(&total)
    }
}

pub fn relative_error(actual: f64, expected: f64) -> f64 {
    if expected == 0.0 {
        actual.abs()
    } else {
        ((actual - expected) / expected).abs()
    }
}
