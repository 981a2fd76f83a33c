//! Standard normal tail probability and its inverse.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};

/// Upper tail of the standard normal, `P(Z > x)`.
pub fn q(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// Standard normal density.
pub fn phi(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Inverse of [`q`]: returns `x` with `q(x) = p`.
pub fn q_inv(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(
            "p",
            format!("tail probability must lie in (0, 1), got {p}"),
        ));
    }
    let x0 = -normal_quantile(p);
    // One Newton step on q itself removes the residual of the rational fit.
    let d = phi(x0);
    if d > 0.0 {
        Ok(x0 + (q(x0) - p) / d)
    } else {
        Ok(x0)
    }
}

/// Wichura's AS241 (PPND16) rational approximation of the normal quantile.
#[allow(clippy::excessive_precision)]
fn normal_quantile(p: f64) -> f64 {
    const A: [f64; 8] = [
        3.387_132_872_796_366_608_0,
        1.331_416_678_917_843_774_5e2,
        1.971_590_950_306_551_442_7e3,
        1.373_169_376_550_946_112_5e4,
        4.592_195_393_154_987_145_7e4,
        6.726_577_092_700_870_085_3e4,
        3.343_057_558_358_812_810_5e4,
        2.509_080_928_730_122_672_7e3,
    ];
    const B: [f64; 8] = [
        1.0,
        4.231_333_070_160_091_125_2e1,
        6.871_870_074_920_579_083_0e2,
        5.394_196_021_424_751_107_7e3,
        2.121_379_430_158_659_586_7e4,
        3.930_789_580_009_271_061_0e4,
        2.872_908_573_572_194_267_4e4,
        5.226_495_278_852_854_561_0e3,
    ];
    const C: [f64; 8] = [
        1.423_437_110_749_683_577_34,
        4.630_337_846_156_545_295_90,
        5.769_497_221_460_691_405_50,
        3.647_848_324_763_204_605_04,
        1.270_458_252_452_368_382_58,
        2.417_807_251_774_506_117_70e-1,
        2.272_384_498_926_918_458_33e-2,
        7.745_450_142_783_414_076_40e-4,
    ];
    const D: [f64; 8] = [
        1.0,
        2.053_191_626_637_758_821_87,
        1.676_384_830_183_803_849_40,
        6.897_673_349_851_000_045_50e-1,
        1.481_039_764_274_800_745_90e-1,
        1.519_866_656_361_645_719_66e-2,
        5.475_938_084_995_344_946_00e-4,
        1.050_750_071_644_416_843_24e-9,
    ];
    const E: [f64; 8] = [
        6.657_904_643_501_103_777_20,
        5.463_784_911_164_114_369_90,
        1.784_826_539_917_291_335_80,
        2.965_605_718_285_048_912_30e-1,
        2.653_218_952_657_612_309_30e-2,
        1.242_660_947_388_078_438_60e-3,
        2.711_555_568_743_487_578_15e-5,
        2.010_334_399_292_288_132_65e-7,
    ];
    const F: [f64; 8] = [
        1.0,
        5.998_322_065_558_879_376_90e-1,
        1.369_298_809_227_358_053_10e-1,
        1.487_536_129_085_061_485_25e-2,
        7.868_691_311_456_132_591_00e-4,
        1.846_318_317_510_054_681_80e-5,
        1.421_511_758_316_445_888_70e-7,
        2.044_263_103_389_939_785_64e-15,
    ];

    fn poly(c: &[f64; 8], x: f64) -> f64 {
        c.iter().rev().fold(0.0, |acc, &k| acc * x + k)
    }

    let dq = p - 0.5;
    if dq.abs() <= 0.425 {
        let r = 0.180_625 - dq * dq;
        return dq * poly(&A, r) / poly(&B, r);
    }
    let tail = if dq < 0.0 { p } else { 1.0 - p };
    let mut r = (-tail.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        poly(&C, r) / poly(&D, r)
    } else {
        r -= 5.0;
        poly(&E, r) / poly(&F, r)
    };
    if dq < 0.0 {
        -val
    } else {
        val
    }
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    // Reference values from a 50-digit erfc evaluation.
    const Q_TABLE: [(f64, f64); 8] = [
        (0.0, 0.5),
        (1.0, 0.158_655_253_931_457_05),
        (2.0, 0.022_750_131_948_179_207),
        (-2.0, 0.977_249_868_051_820_79),
        (5.0, 2.866_515_718_791_939_1e-7),
        (8.0, 6.220_960_574_271_784_1e-16),
        (-0.5, 0.691_462_461_274_013_10),
        (3.5, 2.326_290_790_355_250_4e-4),
    ];

    const Q_INV_TABLE: [(f64, f64); 6] = [
        (1e-10, 6.361_340_902_404_056_2),
        (0.094, 1.316_518_718_418_260_5),
        (0.906, -1.316_518_718_418_260_5),
        (0.5, 0.0),
        (1e-3, 3.090_232_306_167_813_5),
        (0.999_999, -4.753_424_308_822_899),
    ];

    #[test]
    fn q_matches_reference() {
        for (x, want) in Q_TABLE {
            assert_relative_eq!(q(x), want, max_relative = 1e-14);
        }
    }

    #[test]
    fn q_inv_matches_reference() {
        for (p, want) in Q_INV_TABLE {
            let got = q_inv(p).unwrap();
            if want == 0.0 {
                assert!(got.abs() < 1e-16);
            } else {
                // 0.999999 is not exact in binary; its representation error dominates.
                assert_relative_eq!(got, want, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn q_inv_rejects_out_of_range() {
        for p in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(q_inv(p).is_err(), "{p}");
        }
    }

    #[test]
    fn quantile_branches_are_continuous() {
        for p in [0.075, 0.925, (-25.0f64).exp(), 1.0 - (-25.0f64).exp()] {
            for dp in [-1e-12, 0.0, 1e-12] {
                let pp = p + dp * p.min(1.0 - p);
                assert_relative_eq!(q(q_inv(pp).unwrap()), pp, max_relative = 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn round_trip_on_log_scale(e in -10.0f64..0.0, upper in proptest::bool::ANY) {
            let small = 10f64.powf(e).min(0.5);
            let p = if upper { 1.0 - small } else { small };
            let back = q(q_inv(p).unwrap());
            prop_assert!(((back - p) / p).abs() <= 1e-12, "p = {p}, back = {back}");
        }

        #[test]
        fn q_is_decreasing(x in -8.0f64..8.0, dx in 1e-3f64..1.0) {
            prop_assert!(q(x + dx) < q(x));
        }
    }
}
