//! ERB-number scale and rounded-exponential auditory filters.

/// Equivalent rectangular bandwidth in Hz at centre frequency `hz`.
pub fn erb_hz(hz: f64) -> f64 {
    24.7 * (4.37 * hz / 1000.0 + 1.0)
}

/// ERB-number (Cam) of frequency `hz`.
pub fn hz_to_cam(hz: f64) -> f64 {
    21.4 * (4.37 * hz / 1000.0 + 1.0).log10()
}

pub fn cam_to_hz(cam: f64) -> f64 {
    (10f64.powf(cam / 21.4) - 1.0) * 1000.0 / 4.37
}

/// Slope parameter `p = 4 fc / ERB(fc)` of a symmetric roex filter.
pub fn roex_p(fc: f64) -> f64 {
    4.0 * fc / erb_hz(fc)
}

/// Roex weight `(1 + p g) exp(-p g)` at normalised deviation `g = |f - fc| / fc`.
#[inline]
pub fn roex_weight(p: f64, g: f64) -> f64 {
    let pg = p * g;
    (1.0 + pg) * (-pg).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scale_round_trip() {
        for hz in [50.0, 100.0, 1000.0, 3000.0, 8000.0] {
            assert!((cam_to_hz(hz_to_cam(hz)) - hz).abs() < 1e-9);
        }
        // 21.4 log10(4.37 + 1)
        assert!((hz_to_cam(1000.0) - 15.621_450).abs() < 1e-5);
        assert!((erb_hz(1000.0) - 132.639).abs() < 1e-9);
        assert!(hz_to_cam(50.0) < 1.84 && hz_to_cam(8000.0) > 33.0);
    }

    #[test]
    fn roex_shape() {
        assert_eq!(roex_weight(10.0, 0.0), 1.0);
        let p = roex_p(1000.0);
        // integral over g of the two-sided roex is 4/p, so its ERB is 4 fc / p
        let dg = 1e-5;
        let area: f64 = (0..200_000)
            .map(|i| roex_weight(p, (i as f64 + 0.5) * dg) * dg)
            .sum();
        assert!((2.0 * area * 1000.0 - erb_hz(1000.0)).abs() < 0.01);
        assert!(roex_weight(p, 0.1) < roex_weight(p, 0.05));
    }
}
