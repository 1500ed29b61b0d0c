//! Shortest Dubins paths (six words) between two planar poses.

use std::f64::consts::PI;

use crate::geom::Pose2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Seg {
    L,
    S,
    R,
}

const WORDS: [[Seg; 3]; 6] = [
    [Seg::L, Seg::S, Seg::L],
    [Seg::R, Seg::S, Seg::R],
    [Seg::L, Seg::S, Seg::R],
    [Seg::R, Seg::S, Seg::L],
    [Seg::R, Seg::L, Seg::R],
    [Seg::L, Seg::R, Seg::L],
];

fn mod2pi(a: f64) -> f64 {
    a.rem_euclid(2.0 * PI)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DubinsPath {
    start: Pose2,
    rho: f64,
    word: usize,
    /// Normalized segment lengths (multiply by `rho` for metres).
    params: [f64; 3],
}

impl DubinsPath {
    /// Shortest path from `q0` to `q1` with turning radius `rho`.
    pub fn shortest(q0: &Pose2, q1: &Pose2, rho: f64) -> Option<DubinsPath> {
        let dx = q1.x - q0.x;
        let dy = q1.y - q0.y;
        let d = dx.hypot(dy) / rho;
        let th = if d > 0.0 { mod2pi(dy.atan2(dx)) } else { 0.0 };
        let a = mod2pi(q0.theta - th);
        let b = mod2pi(q1.theta - th);
        let mut best: Option<(f64, usize, [f64; 3])> = None;
        for w in 0..WORDS.len() {
            if let Some(p) = word_params(w, a, b, d) {
                let len = p[0] + p[1] + p[2];
                if best.is_none_or(|(l, _, _)| len < l) {
                    best = Some((len, w, p));
                }
            }
        }
        best.map(|(_, word, params)| DubinsPath {
            start: *q0,
            rho,
            word,
            params,
        })
    }

    pub fn length(&self) -> f64 {
        (self.params[0] + self.params[1] + self.params[2]) * self.rho
    }

    /// Pose at arc length `s` metres along the path (clamped to the ends).
    pub fn sample(&self, s: f64) -> Pose2 {
        let tprime = (s / self.rho).clamp(0.0, self.params.iter().sum());
        let mut q = (0.0, 0.0, self.start.theta);
        let segs = WORDS[self.word];
        let mut remaining = tprime;
        for (i, seg) in segs.iter().enumerate() {
            let len = remaining.min(self.params[i]);
            q = advance(q, len, *seg);
            remaining -= len;
            if remaining <= 0.0 {
                break;
            }
        }
        Pose2::new(
            q.0 * self.rho + self.start.x,
            q.1 * self.rho + self.start.y,
            q.2,
        )
    }
}

fn advance(q: (f64, f64, f64), t: f64, seg: Seg) -> (f64, f64, f64) {
    let (x, y, th) = q;
    match seg {
        Seg::L => (
            x + (th + t).sin() - th.sin(),
            y - (th + t).cos() + th.cos(),
            th + t,
        ),
        Seg::R => (
            x - (th - t).sin() + th.sin(),
            y + (th - t).cos() - th.cos(),
            th - t,
        ),
        Seg::S => (x + th.cos() * t, y + th.sin() * t, th),
    }
}

fn word_params(word: usize, a: f64, b: f64, d: f64) -> Option<[f64; 3]> {
    let (sa, sb, ca, cb) = (a.sin(), b.sin(), a.cos(), b.cos());
    let c_ab = (a - b).cos();
    match word {
        0 => {
            let tmp0 = d + sa - sb;
            let p_sq = 2.0 + d * d - 2.0 * c_ab + 2.0 * d * (sa - sb);
            if p_sq < 0.0 {
                return None;
            }
            let tmp1 = (cb - ca).atan2(tmp0);
            Some([mod2pi(tmp1 - a), p_sq.sqrt(), mod2pi(b - tmp1)])
        }
        1 => {
            let tmp0 = d - sa + sb;
            let p_sq = 2.0 + d * d - 2.0 * c_ab + 2.0 * d * (sb - sa);
            if p_sq < 0.0 {
                return None;
            }
            let tmp1 = (ca - cb).atan2(tmp0);
            Some([mod2pi(a - tmp1), p_sq.sqrt(), mod2pi(tmp1 - b)])
        }
        2 => {
            let p_sq = -2.0 + d * d + 2.0 * c_ab + 2.0 * d * (sa + sb);
            if p_sq < 0.0 {
                return None;
            }
            let p = p_sq.sqrt();
            let tmp0 = (-ca - cb).atan2(d + sa + sb) - (-2.0f64).atan2(p);
            Some([mod2pi(tmp0 - a), p, mod2pi(tmp0 - mod2pi(b))])
        }
        3 => {
            let p_sq = -2.0 + d * d + 2.0 * c_ab - 2.0 * d * (sa + sb);
            if p_sq < 0.0 {
                return None;
            }
            let p = p_sq.sqrt();
            let tmp0 = (ca + cb).atan2(d - sa - sb) - 2.0f64.atan2(p);
            Some([mod2pi(a - tmp0), p, mod2pi(b - tmp0)])
        }
        4 => {
            let tmp0 = (6.0 - d * d + 2.0 * c_ab + 2.0 * d * (sa - sb)) / 8.0;
            if tmp0.abs() > 1.0 {
                return None;
            }
            let phi = (ca - cb).atan2(d - sa + sb);
            let p = mod2pi(2.0 * PI - tmp0.acos());
            let t = mod2pi(a - phi + mod2pi(p / 2.0));
            Some([t, p, mod2pi(a - b - t + mod2pi(p))])
        }
        5 => {
            let tmp0 = (6.0 - d * d + 2.0 * c_ab + 2.0 * d * (sb - sa)) / 8.0;
            if tmp0.abs() > 1.0 {
                return None;
            }
            let phi = (ca - cb).atan2(d + sa - sb);
            let p = mod2pi(2.0 * PI - tmp0.acos());
            let t = mod2pi(-a - phi + p / 2.0);
            Some([t, p, mod2pi(mod2pi(b) - a - t + mod2pi(p))])
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::normalize_angle;
    use proptest::prelude::*;

    #[test]
    fn straight_line_is_shortest() {
        let p = DubinsPath::shortest(&Pose2::IDENTITY, &Pose2::new(10.0, 0.0, 0.0), 2.0).unwrap();
        assert!((p.length() - 10.0).abs() < 1e-9);
        let mid = p.sample(4.0);
        assert!((mid.x - 4.0).abs() < 1e-9 && mid.y.abs() < 1e-9);
    }

    #[test]
    fn u_turn_uses_half_circle() {
        // (0,0,0) → (0, 2ρ, π) is a left half circle of length πρ.
        let rho = 1.5;
        let p =
            DubinsPath::shortest(&Pose2::IDENTITY, &Pose2::new(0.0, 2.0 * rho, PI), rho).unwrap();
        assert!((p.length() - PI * rho).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn endpoint_reached(x in -20.0..20.0f64, y in -20.0..20.0f64, t0 in -3.0..3.0f64, t1 in -3.0..3.0f64, rho in 0.5..5.0f64) {
            let q0 = Pose2::new(0.0, 0.0, t0);
            let q1 = Pose2::new(x, y, t1);
            let p = DubinsPath::shortest(&q0, &q1, rho).unwrap();
            let end = p.sample(p.length());
            prop_assert!((end.x - q1.x).abs() < 1e-6 && (end.y - q1.y).abs() < 1e-6);
            prop_assert!(normalize_angle(end.theta - q1.theta).abs() < 1e-6);
            prop_assert!(p.length() + 1e-9 >= q0.distance(&q1));
        }
    }
}
