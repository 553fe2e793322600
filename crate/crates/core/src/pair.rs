//! Bivariate pair copulas: densities, h-functions and inverses, Kendall's
//! tau parameterization, rotations, fitting and simulation.
//!
//! All families are parameterized by Kendall's tau. Clayton and Gumbel tags
//! natively cover only one sign of tau; evaluation extends them to the full
//! range by reflecting the first argument when tau changes sign, so each of
//! the seven candidate families covers tau in (-1, 1).

use crate::error::{Error, Result};
use crate::special::{norm_cdf, norm_quantile, t_cdf, t_quantile};
use crate::stats::kendall_tau;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Numerical guard keeping copula arguments strictly inside the unit square.
pub const EPS: f64 = 1e-10;

/// Kendall's tau magnitude cap used by estimators.
pub const TAU_CAP: f64 = 0.99;

/// Integer grid searched for the Student's t degrees of freedom.
pub const NU_GRID: std::ops::RangeInclusive<u32> = 2..=30;

#[inline]
pub(crate) fn clamp_unit(u: f64) -> f64 {
    u.clamp(EPS, 1.0 - EPS)
}

/// Copula family kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CopulaKind {
    Independence,
    Gaussian,
    StudentT,
    Clayton,
    Gumbel,
}

/// Rotation of the copula density in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rotation {
    R0,
    R90,
    R180,
    R270,
}

impl Rotation {
    /// Partner rotation under the sign-extension rule (reflect first argument).
    fn sign_partner(self) -> Rotation {
        match self {
            Rotation::R0 => Rotation::R90,
            Rotation::R90 => Rotation::R0,
            Rotation::R180 => Rotation::R270,
            Rotation::R270 => Rotation::R180,
        }
    }

    /// Whether positive Kendall's tau is the rotation's native sign.
    fn native_positive(self) -> bool {
        matches!(self, Rotation::R0 | Rotation::R180)
    }
}

/// A copula family tag: kind plus rotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FamilyTag {
    pub kind: CopulaKind,
    pub rotation: Rotation,
}

impl FamilyTag {
    pub const INDEPENDENCE: FamilyTag = FamilyTag {
        kind: CopulaKind::Independence,
        rotation: Rotation::R0,
    };
    pub const GAUSSIAN: FamilyTag = FamilyTag {
        kind: CopulaKind::Gaussian,
        rotation: Rotation::R0,
    };
    pub const STUDENT_T: FamilyTag = FamilyTag {
        kind: CopulaKind::StudentT,
        rotation: Rotation::R0,
    };

    pub fn new(kind: CopulaKind, rotation: Rotation) -> Result<FamilyTag> {
        if rotation != Rotation::R0
            && matches!(
                kind,
                CopulaKind::Independence | CopulaKind::Gaussian | CopulaKind::StudentT
            )
        {
            return Err(Error::ParamDomain(format!(
                "rotation only defined for Clayton/Gumbel, got {kind:?}"
            )));
        }
        Ok(FamilyTag { kind, rotation })
    }

    /// Number of parameters of this family.
    pub fn param_count(&self) -> usize {
        match self.kind {
            CopulaKind::Independence => 0,
            CopulaKind::StudentT => 2,
            _ => 1,
        }
    }

    /// The seven-element candidate set: I, N, T, C, C180, G, G180.
    ///
    /// With the sign-extension rule each of C, C180, G, G180 covers the full
    /// Kendall's tau range, so the eleven rotation tags collapse to seven
    /// effective families.
    pub fn candidate_set() -> Vec<FamilyTag> {
        vec![
            FamilyTag::INDEPENDENCE,
            FamilyTag::GAUSSIAN,
            FamilyTag::STUDENT_T,
            FamilyTag {
                kind: CopulaKind::Clayton,
                rotation: Rotation::R0,
            },
            FamilyTag {
                kind: CopulaKind::Clayton,
                rotation: Rotation::R180,
            },
            FamilyTag {
                kind: CopulaKind::Gumbel,
                rotation: Rotation::R0,
            },
            FamilyTag {
                kind: CopulaKind::Gumbel,
                rotation: Rotation::R180,
            },
        ]
    }

    /// Serialized short name ("I", "N", "T", "C", "C90", ...).
    pub fn as_str(&self) -> &'static str {
        match (self.kind, self.rotation) {
            (CopulaKind::Independence, _) => "I",
            (CopulaKind::Gaussian, _) => "N",
            (CopulaKind::StudentT, _) => "T",
            (CopulaKind::Clayton, Rotation::R0) => "C",
            (CopulaKind::Clayton, Rotation::R90) => "C90",
            (CopulaKind::Clayton, Rotation::R180) => "C180",
            (CopulaKind::Clayton, Rotation::R270) => "C270",
            (CopulaKind::Gumbel, Rotation::R0) => "G",
            (CopulaKind::Gumbel, Rotation::R90) => "G90",
            (CopulaKind::Gumbel, Rotation::R180) => "G180",
            (CopulaKind::Gumbel, Rotation::R270) => "G270",
        }
    }

    pub fn parse(s: &str) -> Result<FamilyTag> {
        let (kind, rotation) = match s {
            "I" => (CopulaKind::Independence, Rotation::R0),
            "N" => (CopulaKind::Gaussian, Rotation::R0),
            "T" => (CopulaKind::StudentT, Rotation::R0),
            "C" => (CopulaKind::Clayton, Rotation::R0),
            "C90" => (CopulaKind::Clayton, Rotation::R90),
            "C180" => (CopulaKind::Clayton, Rotation::R180),
            "C270" => (CopulaKind::Clayton, Rotation::R270),
            "G" => (CopulaKind::Gumbel, Rotation::R0),
            "G90" => (CopulaKind::Gumbel, Rotation::R90),
            "G180" => (CopulaKind::Gumbel, Rotation::R180),
            "G270" => (CopulaKind::Gumbel, Rotation::R270),
            other => {
                return Err(Error::ParamDomain(format!("unknown family tag {other:?}")));
            }
        };
        Ok(FamilyTag { kind, rotation })
    }
}

impl std::fmt::Display for FamilyTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for FamilyTag {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for FamilyTag {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        FamilyTag::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// Parameters of a pair copula in the Kendall's tau parameterization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairParams {
    pub tau: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub df: Option<f64>,
}

impl PairParams {
    pub fn empty() -> PairParams {
        PairParams { tau: 0.0, df: None }
    }

    pub fn tau_only(tau: f64) -> PairParams {
        PairParams { tau, df: None }
    }

    pub fn with_df(tau: f64, df: f64) -> PairParams {
        PairParams { tau, df: Some(df) }
    }
}

/// Which positional argument of the copula cdf is the conditioning variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CondArg {
    First,
    Second,
}

/// A pair copula: family tag plus parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairCopula {
    pub family: FamilyTag,
    pub params: PairParams,
}

// Evaluation form after resolving the sign-extension rule: base copula
// parameters plus the effective rotation.
#[derive(Debug, Clone, Copy)]
enum Resolved {
    Independence,
    Gaussian {
        rho: f64,
    },
    StudentT {
        rho: f64,
        df: f64,
    },
    Clayton {
        theta: f64,
        rot: Rotation,
    },
    Gumbel {
        theta: f64,
        rot: Rotation,
    },
}

impl PairCopula {
    pub fn independence() -> PairCopula {
        PairCopula {
            family: FamilyTag::INDEPENDENCE,
            params: PairParams::empty(),
        }
    }

    pub fn new(family: FamilyTag, params: PairParams) -> Result<PairCopula> {
        let c = PairCopula { family, params };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        match self.family.kind {
            CopulaKind::Independence => Ok(()),
            kind => {
                if !(self.params.tau > -1.0 && self.params.tau < 1.0) {
                    return Err(Error::ParamDomain(format!(
                        "tau {} out of (-1,1) for {}",
                        self.params.tau, self.family
                    )));
                }
                if kind == CopulaKind::StudentT {
                    // domain (1,30); the grid estimator may land on 30 itself
                    match self.params.df {
                        Some(df) if df > 1.0 && df <= 30.0 => {}
                        other => {
                            return Err(Error::ParamDomain(format!(
                                "Student t df {other:?} out of (1,30]"
                            )));
                        }
                    }
                } else if self.params.df.is_some() {
                    return Err(Error::ParamDomain(format!(
                        "df given for non-Student family {}",
                        self.family
                    )));
                }
                Ok(())
            }
        }
    }

    fn resolved(&self) -> Result<Resolved> {
        self.validate()?;
        let tau = self.params.tau;
        Ok(match self.family.kind {
            CopulaKind::Independence => Resolved::Independence,
            CopulaKind::Gaussian => Resolved::Gaussian {
                rho: (std::f64::consts::FRAC_PI_2 * tau).sin(),
            },
            CopulaKind::StudentT => Resolved::StudentT {
                rho: (std::f64::consts::FRAC_PI_2 * tau).sin(),
                df: self.params.df.unwrap(),
            },
            CopulaKind::Clayton => {
                let rot = effective_rotation(self.family.rotation, tau);
                let theta = 2.0 * tau.abs() / (1.0 - tau.abs());
                Resolved::Clayton { theta, rot }
            }
            CopulaKind::Gumbel => {
                let rot = effective_rotation(self.family.rotation, tau);
                let theta = 1.0 / (1.0 - tau.abs());
                Resolved::Gumbel { theta, rot }
            }
        })
    }
}

fn effective_rotation(tag_rotation: Rotation, tau: f64) -> Rotation {
    let matches_native = (tau >= 0.0) == tag_rotation.native_positive();
    if matches_native {
        tag_rotation
    } else {
        tag_rotation.sign_partner()
    }
}

/// Map Kendall's tau to the family's natural parameter (rho or theta).
pub fn tau_to_natural(family: FamilyTag, tau: f64) -> Result<f64> {
    if tau.abs() >= 1.0 {
        return Err(Error::ParamDomain(format!("|tau| = {} >= 1", tau.abs())));
    }
    Ok(match family.kind {
        CopulaKind::Independence => 0.0,
        CopulaKind::Gaussian | CopulaKind::StudentT => (std::f64::consts::FRAC_PI_2 * tau).sin(),
        CopulaKind::Clayton => 2.0 * tau.abs() / (1.0 - tau.abs()),
        CopulaKind::Gumbel => 1.0 / (1.0 - tau.abs()),
    })
}

/// Map the natural parameter back to Kendall's tau. Rotations 90/270 carry
/// negative tau.
pub fn natural_to_tau(family: FamilyTag, param: f64) -> f64 {
    let magnitude = match family.kind {
        CopulaKind::Independence => 0.0,
        CopulaKind::Gaussian | CopulaKind::StudentT => {
            2.0 * param.asin() / std::f64::consts::PI
        }
        CopulaKind::Clayton => param / (param + 2.0),
        CopulaKind::Gumbel => 1.0 - 1.0 / param,
    };
    if family.rotation.native_positive() {
        magnitude
    } else {
        -magnitude
    }
}

/// Pair copula density c(u1, u2).
pub fn pair_density(c: &PairCopula, u1: f64, u2: f64) -> Result<f64> {
    pair_ln_density(c, u1, u2).map(f64::exp)
}

/// Log-density of a pair copula.
pub fn pair_ln_density(c: &PairCopula, u1: f64, u2: f64) -> Result<f64> {
    let r = c.resolved()?;
    Ok(resolved_ln_density(&r, clamp_unit(u1), clamp_unit(u2)))
}

fn resolved_ln_density(r: &Resolved, u1: f64, u2: f64) -> f64 {
    match *r {
        Resolved::Independence => 0.0,
        Resolved::Gaussian { rho } => gaussian_ln_density(u1, u2, rho),
        Resolved::StudentT { rho, df } => student_ln_density(u1, u2, rho, df),
        Resolved::Clayton { theta, rot } => {
            let (a, b) = rotate_args(rot, u1, u2);
            clayton_ln_density(a, b, theta)
        }
        Resolved::Gumbel { theta, rot } => {
            let (a, b) = rotate_args(rot, u1, u2);
            gumbel_ln_density(a, b, theta)
        }
    }
}

#[inline]
fn rotate_args(rot: Rotation, u1: f64, u2: f64) -> (f64, f64) {
    match rot {
        Rotation::R0 => (u1, u2),
        Rotation::R90 => (1.0 - u1, u2),
        Rotation::R180 => (1.0 - u1, 1.0 - u2),
        Rotation::R270 => (u1, 1.0 - u2),
    }
}

fn gaussian_ln_density(u1: f64, u2: f64, rho: f64) -> f64 {
    if rho == 0.0 {
        return 0.0;
    }
    let x = norm_quantile(u1);
    let y = norm_quantile(u2);
    let r2 = 1.0 - rho * rho;
    -0.5 * r2.ln() - (rho * rho * (x * x + y * y) - 2.0 * rho * x * y) / (2.0 * r2)
}

fn student_ln_density(u1: f64, u2: f64, rho: f64, df: f64) -> f64 {
    use crate::special::ln_gamma_fn;
    let x = t_quantile(u1, df);
    let y = t_quantile(u2, df);
    let r2 = 1.0 - rho * rho;
    let quad = (x * x - 2.0 * rho * x * y + y * y) / (df * r2);
    ln_gamma_fn((df + 2.0) / 2.0) + ln_gamma_fn(df / 2.0) - 2.0 * ln_gamma_fn((df + 1.0) / 2.0)
        - 0.5 * r2.ln()
        - 0.5 * (df + 2.0) * quad.ln_1p()
        + 0.5 * (df + 1.0) * ((x * x / df).ln_1p() + (y * y / df).ln_1p())
}

// ln(u^-t + v^-t - 1) computed in log space.
fn clayton_ln_s(u: f64, v: f64, theta: f64) -> f64 {
    let a = -theta * u.ln();
    let b = -theta * v.ln();
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp() - (-m).exp()).ln()
}

fn clayton_ln_density(u: f64, v: f64, theta: f64) -> f64 {
    if theta < 1e-10 {
        return 0.0;
    }
    let ln_s = clayton_ln_s(u, v, theta);
    (1.0 + theta).ln() - (1.0 + theta) * (u.ln() + v.ln()) - (2.0 + 1.0 / theta) * ln_s
}

// ln S with S = (-ln u)^theta + (-ln v)^theta
fn gumbel_ln_s(u: f64, v: f64, theta: f64) -> f64 {
    let a = theta * (-u.ln()).ln();
    let b = theta * (-v.ln()).ln();
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn gumbel_ln_density(u: f64, v: f64, theta: f64) -> f64 {
    if theta - 1.0 < 1e-10 {
        return 0.0;
    }
    let tx = -u.ln();
    let ty = -v.ln();
    let ln_s = gumbel_ln_s(u, v, theta);
    let w = (ln_s / theta).exp();
    -w + (theta - 1.0) * (tx.ln() + ty.ln()) + tx + ty + (1.0 / theta - 2.0) * ln_s
        + (w + theta - 1.0).ln()
}

/// Conditional copula cdf (h-function).
///
/// `arg = Second` returns P(U1 <= u | U2 = v); `arg = First` returns
/// P(U2 <= u | U1 = v). The target value is always `u`, the conditioning
/// value always `v`.
pub fn hfunc(c: &PairCopula, u: f64, v: f64, arg: CondArg) -> Result<f64> {
    let r = c.resolved()?;
    let u = clamp_unit(u);
    let v = clamp_unit(v);
    Ok(resolved_hfunc(&r, u, v, arg).clamp(EPS, 1.0 - EPS))
}

fn resolved_hfunc(r: &Resolved, u: f64, v: f64, arg: CondArg) -> f64 {
    let rot = match *r {
        Resolved::Clayton { rot, .. } | Resolved::Gumbel { rot, .. } => rot,
        _ => Rotation::R0,
    };
    // Reduce a rotated h-function to the base (rotation 0) h-function.
    // Base families are exchangeable, so one base h covers both args.
    let (tu, tv, flip) = match (arg, rot) {
        (CondArg::Second, Rotation::R0) => (u, v, false),
        (CondArg::Second, Rotation::R90) => (1.0 - u, v, true),
        (CondArg::Second, Rotation::R180) => (1.0 - u, 1.0 - v, true),
        (CondArg::Second, Rotation::R270) => (u, 1.0 - v, false),
        (CondArg::First, Rotation::R0) => (u, v, false),
        (CondArg::First, Rotation::R90) => (u, 1.0 - v, false),
        (CondArg::First, Rotation::R180) => (1.0 - u, 1.0 - v, true),
        (CondArg::First, Rotation::R270) => (1.0 - u, v, true),
    };
    let h = base_hfunc(r, tu, tv);
    if flip {
        1.0 - h
    } else {
        h
    }
}

// h(u | v) of the unrotated base family.
fn base_hfunc(r: &Resolved, u: f64, v: f64) -> f64 {
    match *r {
        Resolved::Independence => u,
        Resolved::Gaussian { rho } => {
            if rho == 0.0 {
                return u;
            }
            let x = norm_quantile(u);
            let y = norm_quantile(v);
            norm_cdf((x - rho * y) / (1.0 - rho * rho).sqrt())
        }
        Resolved::StudentT { rho, df } => {
            let x = t_quantile(u, df);
            let y = t_quantile(v, df);
            let scale = ((df + y * y) * (1.0 - rho * rho) / (df + 1.0)).sqrt();
            t_cdf((x - rho * y) / scale, df + 1.0)
        }
        Resolved::Clayton { theta, .. } => {
            if theta < 1e-10 {
                return u;
            }
            let ln_s = clayton_ln_s(u, v, theta);
            ((-theta - 1.0) * v.ln() - (1.0 + 1.0 / theta) * ln_s).exp()
        }
        Resolved::Gumbel { theta, .. } => {
            if theta - 1.0 < 1e-10 {
                return u;
            }
            let ln_s = gumbel_ln_s(u, v, theta);
            let w = (ln_s / theta).exp();
            let ty = -v.ln();
            (-w + (theta - 1.0) * ty.ln() + (1.0 / theta - 1.0) * ln_s + ty).exp()
        }
    }
}

/// Inverse h-function: returns u with `hfunc(c, u, v, arg) = p`.
pub fn hinv(c: &PairCopula, p: f64, v: f64, arg: CondArg) -> Result<f64> {
    let r = c.resolved()?;
    let p = clamp_unit(p);
    let v = clamp_unit(v);
    let rot = match r {
        Resolved::Clayton { rot, .. } | Resolved::Gumbel { rot, .. } => rot,
        _ => Rotation::R0,
    };
    // Undo the same reductions as in `resolved_hfunc`.
    let (tp, tv, flip_u) = match (arg, rot) {
        (CondArg::Second, Rotation::R0) => (p, v, false),
        (CondArg::Second, Rotation::R90) => (1.0 - p, v, true),
        (CondArg::Second, Rotation::R180) => (1.0 - p, 1.0 - v, true),
        (CondArg::Second, Rotation::R270) => (p, 1.0 - v, false),
        (CondArg::First, Rotation::R0) => (p, v, false),
        (CondArg::First, Rotation::R90) => (p, 1.0 - v, false),
        (CondArg::First, Rotation::R180) => (1.0 - p, 1.0 - v, true),
        (CondArg::First, Rotation::R270) => (1.0 - p, v, true),
    };
    let u = base_hinv(&r, tp, tv)?;
    let u = if flip_u { 1.0 - u } else { u };
    Ok(u.clamp(EPS, 1.0 - EPS))
}

fn base_hinv(r: &Resolved, p: f64, v: f64) -> Result<f64> {
    match *r {
        Resolved::Independence => Ok(p),
        Resolved::Gaussian { rho } => {
            if rho == 0.0 {
                return Ok(p);
            }
            let x = norm_quantile(p);
            let y = norm_quantile(v);
            Ok(norm_cdf(x * (1.0 - rho * rho).sqrt() + rho * y))
        }
        Resolved::StudentT { rho, df } => {
            let y = t_quantile(v, df);
            let scale = ((df + y * y) * (1.0 - rho * rho) / (df + 1.0)).sqrt();
            let x = t_quantile(p, df + 1.0) * scale + rho * y;
            Ok(t_cdf(x, df))
        }
        Resolved::Clayton { theta, .. } => {
            if theta < 1e-10 {
                return Ok(p);
            }
            // closed form; falls back to bisection when it degenerates
            let ln_t = -theta / (theta + 1.0) * p.ln() - theta * v.ln();
            let b = -theta * v.ln() - ln_t; // ln(v^-theta) - ln t
            let inner = 1.0 - b.exp() + (-ln_t).exp();
            if inner > 0.0 {
                let ln_u_pow = ln_t + inner.ln();
                let u = (-ln_u_pow / theta).exp();
                if u.is_finite() && u > 0.0 && u < 1.0 {
                    return Ok(u);
                }
            }
            bisect_hinv(r, p, v)
        }
        Resolved::Gumbel { theta, .. } => {
            if theta - 1.0 < 1e-10 {
                return Ok(p);
            }
            bisect_hinv(r, p, v)
        }
    }
}

// Monotone bisection of the base h-function in its first argument.
fn bisect_hinv(r: &Resolved, p: f64, v: f64) -> Result<f64> {
    let mut lo = EPS;
    let mut hi = 1.0 - EPS;
    if base_hfunc(r, lo, v) >= p {
        return Ok(lo);
    }
    if base_hfunc(r, hi, v) <= p {
        return Ok(hi);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let h = base_hfunc(r, mid, v);
        if (h - p).abs() < 1e-13 || hi - lo < 1e-15 {
            return Ok(mid);
        }
        if h < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mid = 0.5 * (lo + hi);
    if (base_hfunc(r, mid, v) - p).abs() < 1e-7 {
        Ok(mid)
    } else {
        Err(Error::Numerical(format!(
            "hinv bisection did not converge (p={p}, v={v})"
        )))
    }
}

/// Sum of log pair densities over data rows.
pub fn pair_loglik(c: &PairCopula, data: &[(f64, f64)]) -> Result<f64> {
    if c.family.kind == CopulaKind::Independence {
        return Ok(0.0);
    }
    let r = c.resolved()?;
    let mut total = 0.0;
    // hoist the per-parameter normalizing constant for the t family; the
    // remaining per-row work is two quantile transforms
    if let Resolved::StudentT { rho, df } = r {
        use crate::special::{ln_gamma_fn, t_quantile};
        let r2 = 1.0 - rho * rho;
        let ln_norm = ln_gamma_fn((df + 2.0) / 2.0) + ln_gamma_fn(df / 2.0)
            - 2.0 * ln_gamma_fn((df + 1.0) / 2.0)
            - 0.5 * r2.ln();
        for &(u1, u2) in data {
            let x = t_quantile(clamp_unit(u1), df);
            let y = t_quantile(clamp_unit(u2), df);
            let quad = (x * x - 2.0 * rho * x * y + y * y) / (df * r2);
            total += ln_norm - 0.5 * (df + 2.0) * quad.ln_1p()
                + 0.5 * (df + 1.0) * ((x * x / df).ln_1p() + (y * y / df).ln_1p());
        }
        return Ok(total);
    }
    for &(u1, u2) in data {
        total += resolved_ln_density(&r, clamp_unit(u1), clamp_unit(u2));
    }
    Ok(total)
}

/// Simulate n pairs from the copula: u2 uniform, u1 by inverse h-function.
pub fn sample_pair<R: Rng + ?Sized>(
    c: &PairCopula,
    n: usize,
    rng: &mut R,
) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let v: f64 = rng.gen();
        let p: f64 = rng.gen();
        let u = hinv(c, p, v, CondArg::Second)?;
        out.push((u, v));
    }
    Ok(out)
}

/// Fit parameters of `family` by Kendall's tau inversion; the Student's t
/// degrees of freedom are profile-MLE'd on the integer grid 2..=30.
pub fn fit_pair(family: FamilyTag, data: &[(f64, f64)]) -> Result<PairParams> {
    fit_pair_opts(family, data, None)
}

/// As `fit_pair`, but the degrees-of-freedom grid search may be restricted to
/// a deterministic subsample of at most `nu_subsample` rows.
pub fn fit_pair_opts(
    family: FamilyTag,
    data: &[(f64, f64)],
    nu_subsample: Option<usize>,
) -> Result<PairParams> {
    if family.kind == CopulaKind::Independence {
        return Ok(PairParams::empty());
    }
    if data.len() < 10 {
        return Err(Error::Estimation(format!(
            "need at least 10 rows to fit, got {}",
            data.len()
        )));
    }
    let xs: Vec<f64> = data.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = data.iter().map(|p| p.1).collect();
    let tau = kendall_tau(&xs, &ys);
    if !tau.is_finite() {
        return Err(Error::Estimation(
            "degenerate data: sample Kendall's tau undefined".into(),
        ));
    }
    let tau = tau.clamp(-TAU_CAP, TAU_CAP);
    if family.kind != CopulaKind::StudentT {
        return Ok(PairParams::tau_only(tau));
    }

    // nu: profile MLE over the integer grid at fixed tau
    let rows: Vec<(f64, f64)> = match nu_subsample {
        Some(cap) if data.len() > cap => {
            let stride = data.len() / cap;
            data.iter().step_by(stride.max(1)).cloned().collect()
        }
        _ => data.to_vec(),
    };
    let mut best = (f64::NEG_INFINITY, 10.0);
    for nu in NU_GRID {
        let c = PairCopula::new(FamilyTag::STUDENT_T, PairParams::with_df(tau, nu as f64))?;
        let ll = pair_loglik(&c, &rows)?;
        if ll > best.0 {
            best = (ll, nu as f64);
        }
    }
    Ok(PairParams::with_df(tau, best.1))
}

/// Copula cdf C(u1, u2) in closed form where available (Independence,
/// Clayton, Gumbel families). Used by finite-difference oracles.
pub fn pair_cdf_closed_form(c: &PairCopula, u1: f64, u2: f64) -> Result<Option<f64>> {
    let r = c.resolved()?;
    let u1 = clamp_unit(u1);
    let u2 = clamp_unit(u2);
    let base_cdf = |rot: Rotation, base: &dyn Fn(f64, f64) -> f64| -> f64 {
        // survival-style corrections for reflected arguments
        match rot {
            Rotation::R0 => base(u1, u2),
            Rotation::R90 => u2 - base(1.0 - u1, u2),
            Rotation::R180 => u1 + u2 - 1.0 + base(1.0 - u1, 1.0 - u2),
            Rotation::R270 => u1 - base(u1, 1.0 - u2),
        }
    };
    Ok(match r {
        Resolved::Independence => Some(u1 * u2),
        Resolved::Clayton { theta, rot } => {
            if theta < 1e-10 {
                Some(u1 * u2)
            } else {
                let f = |a: f64, b: f64| (-clayton_ln_s(a, b, theta) / theta).exp();
                Some(base_cdf(rot, &f))
            }
        }
        Resolved::Gumbel { theta, rot } => {
            if theta - 1.0 < 1e-10 {
                Some(u1 * u2)
            } else {
                let f = |a: f64, b: f64| (-(gumbel_ln_s(a, b, theta) / theta).exp()).exp();
                Some(base_cdf(rot, &f))
            }
        }
        _ => None,
    })
}
