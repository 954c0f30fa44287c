//! dB / dBm conversions. Everything inside the crate is linear; these are for
//! the I/O boundary.

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// `x` dBm in watts: `10^((x - 30) / 10)`.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    linear_to_db(watts) + 30.0
}

/// Shannon rate in bits/s/Hz for a linear SNR.
pub fn rate_from_snr(snr: f64) -> f64 {
    snr.ln_1p() / std::f64::consts::LN_2
}

/// Linear SNR needed for a rate threshold in bits/s/Hz.
pub fn snr_from_rate(rate: f64) -> f64 {
    rate.exp2() - 1.0
}
