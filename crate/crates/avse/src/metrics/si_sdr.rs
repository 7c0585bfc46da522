//! Scale-invariant signal-to-distortion ratio.

use crate::dsp::Waveform;
use crate::metrics::MetricError;

/// Cap applied when the projection residual underflows.
pub const SI_SDR_CAP_DB: f64 = 100.0;

/// SI-SDR in dB of `estimate` against `reference`.
///
/// Computed from the squared correlation `rho^2 = <e,r>^2 / (|r|^2 |e|^2)`
/// as `10 log10(rho^2 / (1 - rho^2))`, which equals the projection form
/// `|a r|^2 / |a r - e|^2` with `a = <e,r> / <r,r>` and is exactly
/// invariant to rescaling either argument. Returns the cap value when the
/// residual underflows.
pub fn si_sdr(estimate: &Waveform, reference: &Waveform) -> Result<f64, MetricError> {
    if estimate.len() != reference.len() {
        return Err(MetricError::LengthMismatch {
            estimate: estimate.len(),
            reference: reference.len(),
        });
    }
    let mut p = 0.0f64; // <estimate, reference>
    let mut q = 0.0f64; // |reference|^2
    let mut r = 0.0f64; // |estimate|^2
    for (&e, &s) in estimate.samples().iter().zip(reference.samples()) {
        let (e, s) = (e as f64, s as f64);
        p += e * s;
        q += s * s;
        r += e * e;
    }
    if q <= 0.0 {
        return Err(MetricError::ZeroEnergy("reference"));
    }
    if r <= 0.0 {
        return Err(MetricError::ZeroEnergy("estimate"));
    }
    let rho2 = p * p / (q * r);
    let residual = 1.0 - rho2;
    if residual <= 1e-10 {
        return Ok(SI_SDR_CAP_DB);
    }
    let ratio = (rho2 / residual).max(1e-10);
    Ok(10.0 * ratio.log10())
}
