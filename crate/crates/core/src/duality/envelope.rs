//! One-dimensional envelope primitives behind the separable transforms.

/// Lower envelope `y -> min_i c (y - x_i)^2 + o_i` of parabolas with common
/// curvature, built in linear time (Felzenszwalb-Huttenlocher). Sites must be
/// increasing; `+inf` offsets are skipped.
#[derive(Debug, Clone)]
pub struct ParabolaEnvelope {
    c: f64,
    sites: Vec<f64>,
    offsets: Vec<f64>,
    // sites[k] is minimal on [bounds[k], bounds[k+1]]
    bounds: Vec<f64>,
}

impl ParabolaEnvelope {
    pub fn new(c: f64, sites: &[f64], offsets: &[f64]) -> Option<Self> {
        debug_assert!(c > 0.0);
        debug_assert_eq!(sites.len(), offsets.len());
        let mut vs: Vec<f64> = Vec::with_capacity(sites.len());
        let mut os: Vec<f64> = Vec::with_capacity(sites.len());
        let mut zs: Vec<f64> = Vec::with_capacity(sites.len() + 1);
        for (&x, &o) in sites.iter().zip(offsets) {
            if o == f64::INFINITY {
                continue;
            }
            if o == f64::NEG_INFINITY {
                // A -inf parabola is the whole envelope.
                return Some(Self { c, sites: vec![x], offsets: vec![o], bounds: vec![f64::NEG_INFINITY, f64::INFINITY] });
            }
            loop {
                let Some(&xk) = vs.last() else {
                    vs.push(x);
                    os.push(o);
                    zs.push(f64::NEG_INFINITY);
                    break;
                };
                let ok = *os.last().unwrap();
                let s = ((o + c * x * x) - (ok + c * xk * xk)) / (2.0 * c * (x - xk));
                // Pop only on strict domination so ties keep the smaller index.
                if s < *zs.last().unwrap() {
                    vs.pop();
                    os.pop();
                    zs.pop();
                } else {
                    vs.push(x);
                    os.push(o);
                    zs.push(s);
                    break;
                }
            }
        }
        if vs.is_empty() {
            return None;
        }
        zs.push(f64::INFINITY);
        Some(Self { c, sites: vs, offsets: os, bounds: zs })
    }

    fn piece(&self, y: f64) -> usize {
        // first k with bounds[k+1] >= y, i.e. the left piece on a tie
        let k = self.bounds[1..].partition_point(|&z| z < y);
        k.min(self.sites.len() - 1)
    }

    pub fn eval(&self, y: f64) -> f64 {
        let k = self.piece(y);
        let d = y - self.sites[k];
        self.c * d * d + self.offsets[k]
    }

    /// The minimizing site for `y`.
    pub fn argmin(&self, y: f64) -> f64 {
        self.sites[self.piece(y)]
    }

    /// Evaluates at increasing `ys` with a single forward sweep.
    pub fn eval_sorted(&self, ys: &[f64], out: &mut [f64]) {
        let mut k = 0;
        for (y, o) in ys.iter().zip(out.iter_mut()) {
            while k + 1 < self.sites.len() && self.bounds[k + 1] < *y {
                k += 1;
            }
            let d = y - self.sites[k];
            *o = self.c * d * d + self.offsets[k];
        }
    }
}

/// Discrete conjugate `y -> max_i x_i y - v_i`, computed from the lower
/// convex hull of the points `(x_i, v_i)`. Sites must be increasing; `+inf`
/// values are skipped. The result is the conjugate of the convexification.
#[derive(Debug, Clone)]
pub struct ConvexConjugate {
    xs: Vec<f64>,
    vs: Vec<f64>,
    // slope of hull edge k -> k+1
    slopes: Vec<f64>,
}

impl ConvexConjugate {
    pub fn new(sites: &[f64], values: &[f64]) -> Option<Self> {
        let mut xs: Vec<f64> = Vec::with_capacity(sites.len());
        let mut vs: Vec<f64> = Vec::with_capacity(sites.len());
        for (&x, &v) in sites.iter().zip(values) {
            if v == f64::INFINITY {
                continue;
            }
            while xs.len() >= 2 {
                let n = xs.len();
                let (x0, v0, x1, v1) = (xs[n - 2], vs[n - 2], xs[n - 1], vs[n - 1]);
                // drop the middle point unless it lies strictly below the chord
                let cross = (x1 - x0) * (v - v0) - (v1 - v0) * (x - x0);
                if cross <= 0.0 {
                    xs.pop();
                    vs.pop();
                } else {
                    break;
                }
            }
            xs.push(x);
            vs.push(v);
        }
        if xs.is_empty() {
            return None;
        }
        let slopes = xs.windows(2).zip(vs.windows(2)).map(|(x, v)| (v[1] - v[0]) / (x[1] - x[0])).collect();
        Some(Self { xs, vs, slopes })
    }

    fn vertex(&self, y: f64) -> usize {
        self.slopes.partition_point(|&s| s < y)
    }

    pub fn eval(&self, y: f64) -> f64 {
        let k = self.vertex(y);
        self.xs[k] * y - self.vs[k]
    }

    pub fn argmax(&self, y: f64) -> f64 {
        self.xs[self.vertex(y)]
    }

    pub fn eval_sorted(&self, ys: &[f64], out: &mut [f64]) {
        let mut k = 0;
        for (y, o) in ys.iter().zip(out.iter_mut()) {
            while k < self.slopes.len() && self.slopes[k] < *y {
                k += 1;
            }
            *o = self.xs[k] * y - self.vs[k];
        }
    }

    /// Hull vertices `(x, v)`: the lower convex envelope restricted to sites.
    pub fn hull(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.vs.iter().copied())
    }
}
