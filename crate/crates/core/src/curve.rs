//! Delay-error curves: MSE as a function of the permitted processing delay.

use crate::error::{Error, Result};

/// Sentinel for a zero linear MSE when expressed in dB.
pub const DB_FLOOR: f64 = -200.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CurveMethod {
    AnalyticUla,
    AnalyticTwoSource,
    ScalarCausal,
    FirCmwf,
}

impl CurveMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            CurveMethod::AnalyticUla => "analytic-ula",
            CurveMethod::AnalyticTwoSource => "analytic-two-source",
            CurveMethod::ScalarCausal => "scalar-causal",
            CurveMethod::FirCmwf => "fir-cmwf",
        }
    }
}

impl std::fmt::Display for CurveMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    /// Permitted delay, seconds (negative = prediction).
    pub alpha_s: f64,
    pub mse_linear: f64,
    /// `10 log10(mse_linear / target_power)`.
    pub mse_db: f64,
}

/// Ordered (delay, MSE) samples produced by one method on one scene.
#[derive(Debug, Clone)]
pub struct DelayErrorCurve {
    method: CurveMethod,
    target_power: f64,
    scene_digest: String,
    points: Vec<CurvePoint>,
}

impl DelayErrorCurve {
    pub fn new(
        method: CurveMethod,
        target_power: f64,
        scene_digest: String,
        points: Vec<(f64, f64)>,
    ) -> Result<Self> {
        if target_power.is_nan() || target_power <= 0.0 {
            return Err(Error::Domain(format!(
                "target power {target_power} must be positive"
            )));
        }
        let mut out = Vec::with_capacity(points.len());
        let mut prev = f64::NEG_INFINITY;
        for (alpha_s, mse_linear) in points {
            if alpha_s <= prev {
                return Err(Error::Domain(format!(
                    "alphas must be strictly increasing at {alpha_s}"
                )));
            }
            if mse_linear < 0.0 || !mse_linear.is_finite() {
                return Err(Error::Domain(format!(
                    "mse {mse_linear} at alpha {alpha_s} out of range"
                )));
            }
            prev = alpha_s;
            let mse_db = if mse_linear == 0.0 {
                DB_FLOOR
            } else {
                10.0 * (mse_linear / target_power).log10()
            };
            out.push(CurvePoint {
                alpha_s,
                mse_linear,
                mse_db,
            });
        }
        Ok(Self {
            method,
            target_power,
            scene_digest,
            points: out,
        })
    }

    pub fn method(&self) -> CurveMethod {
        self.method
    }

    pub fn target_power(&self) -> f64 {
        self.target_power
    }

    pub fn scene_digest(&self) -> &str {
        &self.scene_digest
    }

    pub fn points(&self) -> &[CurvePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// MSE (dB) at the largest delay, the empirical noncausal plateau.
    pub fn plateau_db(&self) -> f64 {
        self.points.last().map(|p| p.mse_db).unwrap_or(f64::NAN)
    }

    /// Largest increase between consecutive points, in dB. Nonpositive for
    /// a perfectly non-increasing curve.
    pub fn max_db_increase(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| w[1].mse_db - w[0].mse_db)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest absolute jump between consecutive points, in dB.
    pub fn max_db_jump(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1].mse_db - w[0].mse_db).abs())
            .fold(0.0, f64::max)
    }

    /// Linear interpolation of the dB curve at a delay (nearest point wins
    /// at the ends).
    pub fn db_at(&self, alpha_s: f64) -> f64 {
        let pts = &self.points;
        if pts.is_empty() {
            return f64::NAN;
        }
        if alpha_s <= pts[0].alpha_s {
            return pts[0].mse_db;
        }
        if alpha_s >= pts[pts.len() - 1].alpha_s {
            return pts[pts.len() - 1].mse_db;
        }
        let i = pts.partition_point(|p| p.alpha_s < alpha_s);
        let (a, b) = (&pts[i - 1], &pts[i]);
        let t = (alpha_s - a.alpha_s) / (b.alpha_s - a.alpha_s);
        a.mse_db + t * (b.mse_db - a.mse_db)
    }
}
