//! Brute-force fusion oracle on the literal (n + m)-qubit register.
//!
//! Qubit order: Alice's n-1 spectators, Alice's extracted atom, Bob's
//! extracted atom, Bob's m-1 spectators. Bit value 1 is g1. The index of a
//! configuration is its bit string read left to right (first qubit most
//! significant).
#![allow(dead_code)]

use num_complex::Complex64 as C;

pub type Vector = Vec<C>;

pub fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

/// W state over `k` qubits as a dense vector of length 2^k.
pub fn w_vector(k: usize) -> Vector {
    let mut v = vec![c(0.0, 0.0); 1 << k];
    for j in 0..k {
        v[1 << j] = c(1.0 / (k as f64).sqrt(), 0.0);
    }
    v
}

/// All qubits in g0.
pub fn ground_vector(k: usize) -> Vector {
    let mut v = vec![c(0.0, 0.0); 1 << k];
    v[0] = c(1.0, 0.0);
    v
}

pub fn kron(a: &[C], b: &[C]) -> Vector {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            out.push(x * y);
        }
    }
    out
}

pub fn inner(a: &[C], b: &[C]) -> C {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[C]) -> f64 {
    inner(a, a).re.sqrt()
}

/// Ideal gate on (extracted A, extracted B); `s` is the sign of the i on
/// the flipped component.
pub fn gate(s: f64) -> [[C; 4]; 4] {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let (o, z) = (c(1.0, 0.0), c(0.0, 0.0));
    // rows/cols: 00, 01, 10, 11 as (A bit, B bit)
    [
        [o, z, z, z],
        [z, c(r, 0.0), c(0.0, s * r), z],
        [z, c(0.0, s * r), c(r, 0.0), z],
        [z, z, z, o],
    ]
}

pub struct Literal {
    pub n: usize,
    pub m: usize,
    pub state: Vector,
}

impl Literal {
    fn bits(&self) -> usize {
        self.n + self.m
    }

    fn pos_a(&self) -> usize {
        self.n - 1
    }

    fn pos_b(&self) -> usize {
        self.n
    }

    fn bit(&self, idx: usize, pos: usize) -> usize {
        (idx >> (self.bits() - 1 - pos)) & 1
    }

    /// |W_n>_A (x) |W_m>_B with the extracted atoms in the middle.
    pub fn initial(n: usize, m: usize) -> Self {
        Literal {
            n,
            m,
            state: kron(&w_vector(n), &w_vector(m)),
        }
    }

    pub fn apply_gate(&mut self, s: f64) {
        let g = gate(s);
        let mut out = vec![c(0.0, 0.0); self.state.len()];
        let (pa, pb) = (self.pos_a(), self.pos_b());
        let shift_a = self.bits() - 1 - pa;
        let shift_b = self.bits() - 1 - pb;
        for (idx, amp) in self.state.iter().enumerate() {
            if amp.norm() == 0.0 {
                continue;
            }
            let col = self.bit(idx, pa) * 2 + self.bit(idx, pb);
            let base = idx & !(1 << shift_a) & !(1 << shift_b);
            for (row, g_row) in g.iter().enumerate() {
                let v = g_row[col];
                if v.norm() == 0.0 {
                    continue;
                }
                let j = base | ((row >> 1) << shift_a) | ((row & 1) << shift_b);
                out[j] += v * amp;
            }
        }
        self.state = out;
    }

    /// Probability and normalized state of the n + m - 2 spectators for the
    /// extracted pair found in (a, b).
    pub fn measure(&self, a: usize, b: usize) -> (f64, Option<Vector>) {
        let rest = self.bits() - 2;
        let mut out = vec![c(0.0, 0.0); 1 << rest];
        for (idx, amp) in self.state.iter().enumerate() {
            if self.bit(idx, self.pos_a()) != a || self.bit(idx, self.pos_b()) != b {
                continue;
            }
            // drop the two middle bits
            let low = idx & ((1 << (self.m - 1)) - 1);
            let high = idx >> (self.m + 1);
            out[(high << (self.m - 1)) | low] += amp;
        }
        let p = norm(&out).powi(2);
        if p < 1e-24 {
            return (p, None);
        }
        let nrm = p.sqrt();
        (p, Some(out.iter().map(|z| z / nrm).collect()))
    }
}

/// Spectator states of the four flags: TT, TW, WT, WW.
pub fn flag_tails(n: usize, m: usize) -> [Vector; 4] {
    let (ga, gb) = (ground_vector(n - 1), ground_vector(m - 1));
    let (wa, wb) = (w_vector(n - 1), w_vector(m - 1));
    [kron(&ga, &gb), kron(&ga, &wb), kron(&wa, &gb), kron(&wa, &wb)]
}

/// Literal spectator state for flag amplitudes.
pub fn embed_flags(n: usize, m: usize, flags: &[C; 4]) -> Vector {
    let tails = flag_tails(n, m);
    let mut out = vec![c(0.0, 0.0); tails[0].len()];
    for (f, t) in flags.iter().zip(&tails) {
        for (o, x) in out.iter_mut().zip(t) {
            *o += f * x;
        }
    }
    out
}

/// `g1 -> i g1` on Alice's (first n-1) or Bob's (last m-1) spectators.
pub fn spectator_phase_gate(n: usize, m: usize, alice: bool, v: &[C]) -> Vector {
    let rest = n + m - 2;
    v.iter()
        .enumerate()
        .map(|(idx, amp)| {
            let excited = (0..rest)
                .filter(|&p| (p < n - 1) == alice)
                .filter(|&p| (idx >> (rest - 1 - p)) & 1 == 1)
                .count();
            amp * C::new(0.0, 1.0).powi(excited as i32)
        })
        .collect()
}
