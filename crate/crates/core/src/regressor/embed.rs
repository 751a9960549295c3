use crate::error::{Error, Result};

/// Sinusoidal embedding of a normalized point.
///
/// The first `d/2` components embed `x`, the last `d/2` embed `y`; each half
/// is `[sin(v·ω₀), cos(v·ω₀), sin(v·ω₁), cos(v·ω₁), …]` with
/// `ω_k = base^(-4k/d)`.
pub fn positional_embedding_2d(x: f64, y: f64, d: usize, base: f64) -> Result<Vec<f64>> {
    if d == 0 || d % 4 != 0 {
        return Err(Error::InvalidConfig(format!("embedding width {d} is not a positive multiple of 4")));
    }
    let mut out = Vec::with_capacity(d);
    for v in [x, y] {
        for k in 0..d / 4 {
            let freq = base.powf(-(4.0 * k as f64) / d as f64);
            out.push((v * freq).sin());
            out.push((v * freq).cos());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_alternates() {
        let e = positional_embedding_2d(0.0, 0.0, 16, 10000.0).unwrap();
        for (i, v) in e.iter().enumerate() {
            assert_eq!(*v, if i % 2 == 0 { 0.0 } else { 1.0 });
        }
    }

    #[test]
    fn width_must_divide_by_four() {
        assert!(positional_embedding_2d(0.1, 0.2, 6, 10000.0).is_err());
        assert!(positional_embedding_2d(0.1, 0.2, 0, 10000.0).is_err());
    }

    #[test]
    fn distinct_points_differ() {
        let a = positional_embedding_2d(0.25, 0.5, 32, 10000.0).unwrap();
        let b = positional_embedding_2d(0.25 + 1.0 / 1024.0, 0.5, 32, 10000.0).unwrap();
        assert!(a.iter().zip(&b).any(|(p, q)| (p - q).abs() > 1e-6));
    }

    #[test]
    fn width_eight_by_hand() {
        // d = 8: per axis two frequencies, 1 and 10000^(-1/2) = 0.01.
        let e = positional_embedding_2d(0.5, 0.25, 8, 10000.0).unwrap();
        let expect = [
            0.5f64.sin(),
            0.5f64.cos(),
            0.005f64.sin(),
            0.005f64.cos(),
            0.25f64.sin(),
            0.25f64.cos(),
            0.0025f64.sin(),
            0.0025f64.cos(),
        ];
        for (a, b) in e.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15, "{a} vs {b}");
        }
    }
}
