//! Counter-based random number generation.
//!
//! Every variate is a pure function of `(seed, i, j)`: the generator holds
//! no mutable state, so draws can be produced in any order, in parallel,
//! or re-produced exactly for a coarser time grid. Monte Carlo loops key
//! the sample index into the seed via [`CounterRng::stream`].
//!
//! A 64-bit counter word is hashed through rounds of the splitmix64
//! finalizer (one round per key component), mapped to a uniform in (0,1),
//! and sent through the inverse normal CDF (Wichura's AS 241, double
//! precision) when a Gaussian is required.

/// Stateless keyed generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CounterRng {
    key: u64,
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const MUL_I: u64 = 0xBF58_476D_1CE4_E5B9;
const MUL_J: u64 = 0x94D0_49BB_1331_11EB;

/// splitmix64 finalizer: full-avalanche bijection on u64.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        CounterRng { key: mix(seed ^ GOLDEN) }
    }

    /// Derives an independent substream, e.g. one per Monte Carlo sample
    /// or one per internal consumer (bootstrap, probe vectors).
    pub fn stream(&self, tag: u64) -> Self {
        CounterRng {
            key: mix(self.key ^ tag.wrapping_mul(GOLDEN) ^ GOLDEN),
        }
    }

    /// Raw 64-bit word for counter `(i, j)`.
    pub fn raw(&self, i: u64, j: u64) -> u64 {
        let z = mix(self.key ^ i.wrapping_mul(MUL_I));
        mix(z ^ j.wrapping_mul(MUL_J))
    }

    /// Uniform in the open interval (0,1), 53-bit resolution.
    pub fn uniform(&self, i: u64, j: u64) -> f64 {
        ((self.raw(i, j) >> 11) as f64 + 0.5) * (1.0 / 9007199254740992.0)
    }

    /// Standard normal variate for counter `(i, j)`.
    pub fn normal(&self, i: u64, j: u64) -> f64 {
        inverse_normal_cdf(self.uniform(i, j))
    }
}

fn horner(r: f64, coeffs: &[f64]) -> f64 {
    let mut acc = coeffs[0];
    for &c in &coeffs[1..] {
        acc = acc * r + c;
    }
    acc
}

// AS 241 PPND16 rational approximations; coefficients ordered from the
// highest power down, as `horner` consumes them.
const CENTRAL_NUM: [f64; 8] = [
    2.5090809287301226727e3,
    3.3430575583588128105e4,
    6.7265770927008700853e4,
    4.5921953931549871457e4,
    1.3731693765509461125e4,
    1.9715909503065514427e3,
    1.3314166789178437745e2,
    3.3871328727963666080e0,
];
const CENTRAL_DEN: [f64; 8] = [
    5.2264952788528545610e3,
    2.8729085735721942674e4,
    3.9307895800092710610e4,
    2.1213794301586595867e4,
    5.3941960214247511077e3,
    6.8718700749205790830e2,
    4.2313330701600911252e1,
    1.0,
];
const MID_NUM: [f64; 8] = [
    7.74545014278341407640e-4,
    2.27238449892691845833e-2,
    2.41780725177450611770e-1,
    1.27045825245236838258e0,
    3.64784832476320460504e0,
    5.76949722146069140550e0,
    4.63033784615654529590e0,
    1.42343711074968357734e0,
];
const MID_DEN: [f64; 8] = [
    1.05075007164441684324e-9,
    5.47593808499534494600e-4,
    1.51986665636164571966e-2,
    1.48103976427480074590e-1,
    6.89767334985100004550e-1,
    1.67638483018380384940e0,
    2.05319162663775882187e0,
    1.0,
];
const FAR_NUM: [f64; 8] = [
    2.01033439929228813265e-7,
    2.71155556874348757815e-5,
    1.24266094738807843860e-3,
    2.65321895265761230930e-2,
    2.96560571828504891230e-1,
    1.78482653991729133580e0,
    5.46378491116411436990e0,
    6.65790464350110377720e0,
];
const FAR_DEN: [f64; 8] = [
    2.04426310338993978564e-15,
    1.42151175831644588870e-7,
    1.84631831751005468180e-5,
    7.86869131145613259100e-4,
    1.48753612908506148525e-2,
    1.36929880922735805310e-1,
    5.99832206555887937690e-1,
    1.0,
];

/// Inverse of the standard normal CDF (AS 241, PPND16).
///
/// Relative accuracy about 1e-15 for u in (0,1); u must be strictly
/// inside the open interval.
pub fn inverse_normal_cdf(u: f64) -> f64 {
    debug_assert!(u > 0.0 && u < 1.0);
    let q = u - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * horner(r, &CENTRAL_NUM) / horner(r, &CENTRAL_DEN);
    }
    let r0 = if q < 0.0 { u } else { 1.0 - u };
    let r = (-r0.ln()).sqrt();
    let val = if r <= 5.0 {
        let r = r - 1.6;
        horner(r, &MID_NUM) / horner(r, &MID_DEN)
    } else {
        let r = r - 5.0;
        horner(r, &FAR_NUM) / horner(r, &FAR_DEN)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}
