//! One-variable profiles that follow prescribed closed-form expressions on
//! zones and are blended across the gaps with a quintic smoothstep.

/// `[value, first derivative, second derivative]` of a closed-form expression.
pub type Expr = fn(f64) -> [f64; 3];

#[derive(Debug, Clone, Copy)]
enum Piece {
    Exact(Expr),
    Blend(Expr, Expr),
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    lo: f64,
    hi: f64,
    piece: Piece,
}

/// Piecewise profile over consecutive segments `[lo, hi)`; points outside
/// the covered range use the nearest segment.
#[derive(Debug, Clone)]
pub struct BlendedProfile {
    segments: Vec<Segment>,
    /// Points where the value is returned as exactly zero.
    pinned_zeros: Vec<f64>,
}

/// `6t^5 - 15t^4 + 10t^3` and its first two derivatives.
pub fn smoothstep(t: f64) -> [f64; 3] {
    let t = t.clamp(0.0, 1.0);
    [
        t * t * t * (10.0 + t * (-15.0 + 6.0 * t)),
        30.0 * t * t * (1.0 - t) * (1.0 - t),
        60.0 * t * (1.0 - t) * (1.0 - 2.0 * t),
    ]
}

impl BlendedProfile {
    pub fn new() -> Self {
        Self {
            segments: Vec::new(),
            pinned_zeros: Vec::new(),
        }
    }

    pub fn exact(mut self, lo: f64, hi: f64, f: Expr) -> Self {
        self.push(lo, hi, Piece::Exact(f));
        self
    }

    pub fn blend(mut self, lo: f64, hi: f64, left: Expr, right: Expr) -> Self {
        self.push(lo, hi, Piece::Blend(left, right));
        self
    }

    pub fn pin_zero(mut self, x: f64) -> Self {
        self.pinned_zeros.push(x);
        self
    }

    fn push(&mut self, lo: f64, hi: f64, piece: Piece) {
        assert!(hi > lo, "empty profile segment");
        if let Some(last) = self.segments.last() {
            assert_eq!(last.hi, lo, "profile segments must be contiguous");
        }
        self.segments.push(Segment { lo, hi, piece });
    }

    pub fn range(&self) -> (f64, f64) {
        (self.segments[0].lo, self.segments[self.segments.len() - 1].hi)
    }

    fn segment(&self, x: f64) -> &Segment {
        let idx = self.segments.partition_point(|s| s.hi <= x);
        &self.segments[idx.min(self.segments.len() - 1)]
    }

    /// Value and first two derivatives at `x`.
    pub fn eval(&self, x: f64) -> [f64; 3] {
        let seg = self.segment(x);
        let out = match seg.piece {
            Piece::Exact(f) => f(x),
            Piece::Blend(l, r) => {
                let len = seg.hi - seg.lo;
                let [s, s1, s2] = smoothstep((x - seg.lo) / len);
                let (s1, s2) = (s1 / len, s2 / (len * len));
                let (a, b) = (l(x), r(x));
                let d = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
                [
                    a[0] + s * d[0],
                    a[1] + s1 * d[0] + s * d[1],
                    a[2] + s2 * d[0] + 2.0 * s1 * d[1] + s * d[2],
                ]
            }
        };
        if self.pinned_zeros.contains(&x) {
            [0.0, out[1], out[2]]
        } else {
            out
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        self.eval(x)[0]
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.eval(x)[1]
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        self.eval(x)[2]
    }

    /// Interior seams between segments.
    pub fn seams(&self) -> Vec<f64> {
        self.segments.iter().skip(1).map(|s| s.lo).collect()
    }
}

impl Default for BlendedProfile {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(x: f64) -> [f64; 3] {
        [x, 1.0, 0.0]
    }

    fn parabola(x: f64) -> [f64; 3] {
        [x * x, 2.0 * x, 2.0]
    }

    #[test]
    fn smoothstep_endpoints() {
        assert_eq!(smoothstep(0.0), [0.0, 0.0, 0.0]);
        assert_eq!(smoothstep(1.0), [1.0, 0.0, 0.0]);
        assert_eq!(smoothstep(0.5)[0], 0.5);
    }

    #[test]
    fn blend_derivatives_match_finite_differences() {
        let p = BlendedProfile::new().exact(-1.0, 0.0, line).blend(0.0, 1.0, line, parabola).exact(1.0, 2.0, parabola);
        for &x in &[-0.5, 0.1, 0.37, 0.8, 1.5] {
            let h = 1e-5;
            let d1 = (p.value(x + h) - p.value(x - h)) / (2.0 * h);
            let d2 = (p.derivative(x + h) - p.derivative(x - h)) / (2.0 * h);
            assert!((d1 - p.derivative(x)).abs() < 1e-8);
            assert!((d2 - p.second_derivative(x)).abs() < 1e-6);
        }
        // C2 across seams
        for s in p.seams() {
            let (a, b) = (p.eval(s - 1e-12), p.eval(s));
            for k in 0..3 {
                assert!((a[k] - b[k]).abs() < 1e-9);
            }
        }
    }
}
