//! Leaf distributions.
//!
//! A leaf models a subset of the local dimensions of its tree (its *target*
//! dimensions). Each discrete target gets an independent multinomial over the
//! values admissible in the leaf; the continuous targets share one
//! [`ContinuousLeaf`]. Every continuous family is normalized over the leaf's
//! own box, so a tree evaluates `mass(leaf) * leaf density`.
//!
//! The interpolating families are mixtures of fixed corner densities. On a box
//! with sides `[a_j, b_j]` let `h1(x) = (x - a)/(b - a)` and `h0 = 1 - h1`; the
//! corner density for corner `c` is `2^d / Vol * prod_j h_{c_j}(x_j)`, which
//! integrates to one over the box. Multilinear leaves put a weight on every
//! corner; independent linear leaves use one two-corner mixture per dimension.

mod em;
mod fit;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::region::{Extent, Region};
use crate::rng::Rng;
use crate::stats::{normal_interval_mass, normal_log_pdf, sample_truncated_normal};

pub use em::{fit_linear_interp_em, fit_multilinear_em, EmFitConfig, EmTrace};
pub use fit::{fit_diag_gaussian, fit_linreg_gaussian, fit_multinomial, LeafBuilder, LeafFamily, LinRegFit};

/// Independent multinomial over one discrete dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteFactor {
    pub dim: usize,
    pub values: Vec<u32>,
    pub probs: Vec<f64>,
}

impl DiscreteFactor {
    fn prob_of(&self, v: f64) -> f64 {
        if v < 0.0 || v.fract() != 0.0 {
            return 0.0;
        }
        match self.values.binary_search(&(v as u32)) {
            Ok(i) => self.probs[i],
            Err(_) => 0.0,
        }
    }

    fn prob_among(&self, set: &[u32]) -> f64 {
        self.values
            .iter()
            .zip(&self.probs)
            .filter(|(v, _)| set.binary_search(v).is_ok())
            .map(|(_, p)| p)
            .sum()
    }

    fn sample(&self, rng: &mut Rng) -> f64 {
        let mut u = rng.random::<f64>();
        for (v, p) in self.values.iter().zip(&self.probs) {
            if u < *p {
                return f64::from(*v);
            }
            u -= p;
        }
        f64::from(*self.values.last().expect("non-empty value set"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ContinuousLeaf {
    /// No continuous target dimensions.
    None,
    Uniform {
        dims: Vec<usize>,
    },
    /// Diagonal Gaussian truncated to the leaf box.
    Gaussian {
        dims: Vec<usize>,
        mean: Vec<f64>,
        var: Vec<f64>,
    },
    /// Gaussian over one child dimension whose mean is affine in the
    /// regressor dimensions, truncated to the child's interval at every
    /// regressor value.
    LinReg {
        child: usize,
        regressors: Vec<usize>,
        coef: Vec<f64>,
        intercept: f64,
        var: f64,
        /// Set when the design was rank deficient and a constant mean was fit.
        #[serde(default)]
        constant_fallback: bool,
    },
    /// Independent linear densities, one `[w0, w1]` pair per dimension.
    Linear {
        dims: Vec<usize>,
        weights: Vec<[f64; 2]>,
    },
    /// Corner weights; bit `k` of the corner index selects the high side of `dims[k]`.
    Multilinear {
        dims: Vec<usize>,
        weights: Vec<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeafDist {
    pub discrete: Vec<DiscreteFactor>,
    pub continuous: ContinuousLeaf,
}

/// What to do with one dimension when evaluating a leaf.
#[derive(Clone, Copy, Debug)]
pub enum Probe<'a> {
    /// Density (or probability) at a value.
    At(f64),
    /// Mass over an interval.
    Span(f64, f64),
    /// Mass over a set of discrete values.
    Among(&'a [u32]),
    /// Integrated out.
    Free,
}

fn hat(bit: usize, a: f64, b: f64, probe: Probe) -> f64 {
    let w = b - a;
    match probe {
        Probe::At(x) => {
            let x = x.clamp(a, b);
            if bit == 1 {
                2.0 * (x - a) / (w * w)
            } else {
                2.0 * (b - x) / (w * w)
            }
        }
        Probe::Span(s, t) => {
            let (s, t) = (s.clamp(a, b), t.clamp(a, b));
            if bit == 1 {
                ((t - a).powi(2) - (s - a).powi(2)) / (w * w)
            } else {
                ((b - s).powi(2) - (b - t).powi(2)) / (w * w)
            }
        }
        Probe::Among(_) | Probe::Free => 1.0,
    }
}

/// `ln P(lo < Z < hi)` for standard normal `Z`, usable deep in the tails.
fn log_normal_interval_mass(lo: f64, hi: f64) -> f64 {
    let m = normal_interval_mass(lo, hi);
    if m > 1e-300 {
        return m.ln();
    }
    // Mills-ratio asymptotics on the tail side of the interval
    let log_tail = |z: f64| -0.5 * z * z - z.ln() - 0.918_938_533_204_672_8;
    let (near, far) = if lo > 0.0 { (lo, hi) } else { (-hi, -lo) };
    if near <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let a = log_tail(near);
    let b = if far.is_finite() { log_tail(far) } else { f64::NEG_INFINITY };
    a + (-(b - a).exp()).ln_1p()
}

fn gaussian_factor(mean: f64, var: f64, a: f64, b: f64, probe: Probe) -> f64 {
    let sd = var.sqrt();
    let log_z = log_normal_interval_mass((a - mean) / sd, (b - mean) / sd);
    match probe {
        Probe::At(x) => normal_log_pdf(x, mean, var) - log_z,
        Probe::Span(s, t) => {
            let (s, t) = (s.clamp(a, b), t.clamp(a, b));
            if t <= s {
                return f64::NEG_INFINITY;
            }
            (log_normal_interval_mass((s - mean) / sd, (t - mean) / sd) - log_z).min(0.0)
        }
        Probe::Among(_) | Probe::Free => 0.0,
    }
}

fn uniform_factor(a: f64, b: f64, probe: Probe) -> f64 {
    match probe {
        Probe::At(_) => -(b - a).ln(),
        Probe::Span(s, t) => ((t.min(b) - s.max(a)).max(0.0) / (b - a)).ln(),
        Probe::Among(_) | Probe::Free => 0.0,
    }
}

impl LeafDist {
    /// Uniform over every dimension of `region`.
    pub fn uniform(region: &Region) -> Self {
        let mut discrete = Vec::new();
        let mut cont = Vec::new();
        for (dim, e) in region.dims.iter().enumerate() {
            match e {
                Extent::Interval { .. } => cont.push(dim),
                Extent::Values(vs) => discrete.push(DiscreteFactor {
                    dim,
                    values: vs.clone(),
                    probs: vec![1.0 / vs.len() as f64; vs.len()],
                }),
            }
        }
        LeafDist {
            discrete,
            continuous: if cont.is_empty() {
                ContinuousLeaf::None
            } else {
                ContinuousLeaf::Uniform { dims: cont }
            },
        }
    }

    /// Log of the leaf integrated against `probes` (indexed by local dimension).
    /// Dimensions the leaf does not model contribute nothing.
    pub fn log_probe(&self, region: &Region, probes: &[Probe]) -> f64 {
        let mut total = 0.0;
        for f in &self.discrete {
            let p = match probes[f.dim] {
                Probe::At(v) => f.prob_of(v),
                Probe::Among(set) => f.prob_among(set),
                Probe::Span(..) | Probe::Free => 1.0,
            };
            total += p.ln();
        }
        total + self.log_probe_continuous(region, probes)
    }

    fn log_probe_continuous(&self, region: &Region, probes: &[Probe]) -> f64 {
        match &self.continuous {
            ContinuousLeaf::None => 0.0,
            ContinuousLeaf::Uniform { dims } => dims
                .iter()
                .map(|&d| {
                    let (a, b) = region.dims[d].interval();
                    uniform_factor(a, b, probes[d])
                })
                .sum(),
            ContinuousLeaf::Gaussian { dims, mean, var } => dims
                .iter()
                .enumerate()
                .map(|(k, &d)| {
                    let (a, b) = region.dims[d].interval();
                    gaussian_factor(mean[k], var[k], a, b, probes[d])
                })
                .sum(),
            ContinuousLeaf::LinReg {
                child,
                regressors,
                coef,
                intercept,
                var,
                ..
            } => {
                let mu = self.linreg_mean(probes, regressors, coef, *intercept, region);
                let (a, b) = region.dims[*child].interval();
                gaussian_factor(mu, *var, a, b, probes[*child])
            }
            ContinuousLeaf::Linear { dims, weights } => dims
                .iter()
                .zip(weights)
                .map(|(&d, w)| {
                    let (a, b) = region.dims[d].interval();
                    let p = probes[d];
                    (w[0] * hat(0, a, b, p) + w[1] * hat(1, a, b, p)).ln()
                })
                .sum(),
            ContinuousLeaf::Multilinear { dims, weights } => {
                let factors: Vec<[f64; 2]> = dims
                    .iter()
                    .map(|&d| {
                        let (a, b) = region.dims[d].interval();
                        [hat(0, a, b, probes[d]), hat(1, a, b, probes[d])]
                    })
                    .collect();
                corner_sum(weights, &factors).ln()
            }
        }
    }

    fn linreg_mean(&self, probes: &[Probe], regressors: &[usize], coef: &[f64], intercept: f64, region: &Region) -> f64 {
        regressors.iter().zip(coef).fold(intercept, |acc, (&d, c)| {
            let x = match probes[d] {
                Probe::At(x) => x,
                // an unobserved regressor is taken at the centre of its range
                _ => region.dims[d].midpoint(),
            };
            acc + c * x
        })
    }

    /// Log density of the modeled dimensions at `point`, normalized over the
    /// leaf box. Points outside the box give `-inf`.
    pub fn log_density(&self, point: &[f64], region: &Region) -> f64 {
        if !region.contains(point) {
            return f64::NEG_INFINITY;
        }
        let probes: Vec<Probe> = point.iter().map(|&x| Probe::At(x)).collect();
        self.log_probe(region, &probes)
    }

    /// Log marginal density of the dimensions flagged in `keep`; every other
    /// dimension is integrated out analytically.
    pub fn log_marginal(&self, point: &[f64], region: &Region, keep: &[bool]) -> f64 {
        let probes: Vec<Probe> = point
            .iter()
            .zip(keep)
            .map(|(&x, &k)| if k { Probe::At(x) } else { Probe::Free })
            .collect();
        self.log_probe(region, &probes)
    }

    /// Marginal density of the parent dimensions (`parents[d]` true), exponentiated.
    pub fn marginal_density(&self, point: &[f64], region: &Region, parents: &[bool]) -> f64 {
        self.log_marginal(point, region, parents).exp()
    }

    /// Log density of dimension `child` given every other dimension of `point`.
    /// Falls back to the uniform conditional over the child's extent when the
    /// marginal vanishes; the second value reports the fallback.
    pub fn log_conditional(&self, point: &[f64], region: &Region, child: usize) -> (f64, bool) {
        let keep: Vec<bool> = (0..point.len()).map(|d| d != child).collect();
        let marginal = self.log_marginal(point, region, &keep);
        if marginal == f64::NEG_INFINITY {
            return (-region.dims[child].measure().ln(), true);
        }
        (self.log_density(point, region) - marginal, false)
    }

    /// Mass of the conditional of `child` given the other coordinates of
    /// `point`, over `span` (an interval or a value set of the child).
    pub fn conditional_mass(&self, point: &[f64], region: &Region, child: usize, span: &Extent) -> f64 {
        let keep: Vec<bool> = (0..point.len()).map(|d| d != child).collect();
        let marginal = self.log_marginal(point, region, &keep);
        let mut probes: Vec<Probe> = point.iter().map(|&x| Probe::At(x)).collect();
        probes[child] = match span {
            Extent::Interval { lo, hi } => Probe::Span(*lo, *hi),
            Extent::Values(vs) => Probe::Among(vs),
        };
        if marginal == f64::NEG_INFINITY {
            let own = &region.dims[child];
            return match (span, own) {
                (Extent::Interval { lo, hi }, Extent::Interval { lo: a, hi: b }) => (hi.min(*b) - lo.max(*a)).max(0.0) / (b - a),
                (Extent::Values(vs), Extent::Values(own)) => {
                    own.iter().filter(|v| vs.binary_search(v).is_ok()).count() as f64 / own.len() as f64
                }
                _ => 0.0,
            };
        }
        (self.log_probe(region, &probes) - marginal).exp()
    }

    /// Exact mass of the leaf distribution inside `sub`, a sub-box of `region`.
    pub fn mass_in(&self, sub: &Region, region: &Region) -> f64 {
        let probes: Vec<Probe> = sub
            .dims
            .iter()
            .map(|e| match e {
                Extent::Interval { lo, hi } => Probe::Span(*lo, *hi),
                Extent::Values(vs) => Probe::Among(vs),
            })
            .collect();
        self.log_probe(region, &probes).exp()
    }

    /// Whether `dim` is modeled by this leaf.
    pub fn models(&self, dim: usize) -> bool {
        self.discrete.iter().any(|f| f.dim == dim)
            || match &self.continuous {
                ContinuousLeaf::None => false,
                ContinuousLeaf::Uniform { dims }
                | ContinuousLeaf::Gaussian { dims, .. }
                | ContinuousLeaf::Linear { dims, .. }
                | ContinuousLeaf::Multilinear { dims, .. } => dims.contains(&dim),
                ContinuousLeaf::LinReg { child, .. } => *child == dim,
            }
    }

    /// Draws a point from the leaf. Dimensions the leaf does not model are
    /// drawn uniformly from the box.
    pub fn sample(&self, region: &Region, rng: &mut Rng) -> Vec<f64> {
        let mut point: Vec<f64> = region.dims.iter().map(|e| uniform_in(e, rng)).collect();
        for f in &self.discrete {
            point[f.dim] = f.sample(rng);
        }
        match &self.continuous {
            ContinuousLeaf::None | ContinuousLeaf::Uniform { .. } => {}
            ContinuousLeaf::Gaussian { dims, mean, var } => {
                for (k, &d) in dims.iter().enumerate() {
                    let (a, b) = region.dims[d].interval();
                    point[d] = sample_truncated_normal(mean[k], var[k].sqrt(), a, b, rng);
                }
            }
            ContinuousLeaf::LinReg { child, .. } => {
                point[*child] = self.sample_child(&point, region, *child, rng);
            }
            ContinuousLeaf::Linear { dims, weights } => {
                for (&d, w) in dims.iter().zip(weights) {
                    let bit = usize::from(rng.random::<f64>() >= w[0]);
                    point[d] = sample_ramp(bit, region.dims[d].interval(), rng);
                }
            }
            ContinuousLeaf::Multilinear { dims, weights } => {
                let mut u = rng.random::<f64>();
                let mut corner = weights.len() - 1;
                for (c, w) in weights.iter().enumerate() {
                    if u < *w {
                        corner = c;
                        break;
                    }
                    u -= w;
                }
                for (k, &d) in dims.iter().enumerate() {
                    point[d] = sample_ramp((corner >> k) & 1, region.dims[d].interval(), rng);
                }
            }
        }
        point
    }

    /// Draws dimension `child` from its conditional given the other
    /// coordinates of `point`.
    pub fn sample_child(&self, point: &[f64], region: &Region, child: usize, rng: &mut Rng) -> f64 {
        let extent = &region.dims[child];
        if let Some(f) = self.discrete.iter().find(|f| f.dim == child) {
            return f.sample(rng);
        }
        match &self.continuous {
            ContinuousLeaf::Gaussian { dims, mean, var } => match dims.iter().position(|&d| d == child) {
                Some(k) => {
                    let (a, b) = extent.interval();
                    sample_truncated_normal(mean[k], var[k].sqrt(), a, b, rng)
                }
                None => uniform_in(extent, rng),
            },
            ContinuousLeaf::LinReg {
                child: c,
                regressors,
                coef,
                intercept,
                var,
                ..
            } if *c == child => {
                let probes: Vec<Probe> = point.iter().map(|&x| Probe::At(x)).collect();
                let mu = self.linreg_mean(&probes, regressors, coef, *intercept, region);
                let (a, b) = extent.interval();
                sample_truncated_normal(mu, var.sqrt(), a, b, rng)
            }
            ContinuousLeaf::Linear { dims, weights } => match dims.iter().position(|&d| d == child) {
                Some(k) => {
                    let bit = usize::from(rng.random::<f64>() >= weights[k][0]);
                    sample_ramp(bit, extent.interval(), rng)
                }
                None => uniform_in(extent, rng),
            },
            ContinuousLeaf::Multilinear { dims, weights } => match dims.iter().position(|&d| d == child) {
                Some(k) => {
                    // mass of each child-side ramp given the other coordinates
                    let mut side = [0.0f64; 2];
                    for (c, w) in weights.iter().enumerate() {
                        let mut v = *w;
                        for (j, &d) in dims.iter().enumerate() {
                            if j != k {
                                let (a, b) = region.dims[d].interval();
                                v *= hat((c >> j) & 1, a, b, Probe::At(point[d]));
                            }
                        }
                        side[(c >> k) & 1] += v;
                    }
                    let total = side[0] + side[1];
                    let bit = if total > 0.0 {
                        usize::from(rng.random::<f64>() * total >= side[0])
                    } else {
                        usize::from(rng.random::<bool>())
                    };
                    sample_ramp(bit, extent.interval(), rng)
                }
                None => uniform_in(extent, rng),
            },
            _ => uniform_in(extent, rng),
        }
    }
}

/// `sum_c w_c prod_k factors[k][bit_k(c)]`, contracted one dimension at a time.
fn corner_sum(weights: &[f64], factors: &[[f64; 2]]) -> f64 {
    let mut acc = weights.to_vec();
    for (k, f) in factors.iter().enumerate().rev() {
        let half = 1usize << k;
        for c in 0..half {
            acc[c] = acc[c] * f[0] + acc[c + half] * f[1];
        }
        acc.truncate(half);
    }
    acc[0]
}

fn uniform_in(e: &Extent, rng: &mut Rng) -> f64 {
    match e {
        Extent::Interval { lo, hi } => lo + rng.random::<f64>() * (hi - lo),
        Extent::Values(vs) => f64::from(vs[rng.random_range(0..vs.len())]),
    }
}

/// Draws from the normalized ramp `h_bit` on `[a, b]`.
fn sample_ramp(bit: usize, (a, b): (f64, f64), rng: &mut Rng) -> f64 {
    let r = rng.random::<f64>().sqrt();
    if bit == 1 {
        a + (b - a) * r
    } else {
        b - (b - a) * r
    }
}
