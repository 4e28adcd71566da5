//! Benchmark fixtures.

use smallball::EigenSpectrum;

/// The spectra every benchmark group runs over.
pub fn spectra() -> Vec<(&'static str, EigenSpectrum)> {
    vec![
        ("poly-1.5", EigenSpectrum::polynomial(1.5).unwrap()),
        ("poly-2", EigenSpectrum::polynomial(2.0).unwrap()),
        ("exp-0.5", EigenSpectrum::exponential(0.5).unwrap()),
    ]
}
