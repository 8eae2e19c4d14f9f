//! Plain CSV export of DBCS1 matrices.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::mat_read;
use crate::matrix::DenseMatrix;

/// Shortest decimal rendering of `v` at 17 significant digits, trailing zeros
/// dropped. Values with a decimal exponent outside `-5..17` use `e` notation.
pub fn format_g17(v: f64) -> String {
    let sci = format!("{v:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let (sign, mantissa) = match mantissa.strip_prefix('-') {
        Some(rest) => ("-", rest),
        None => ("", mantissa),
    };
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    let digits = digits.trim_end_matches('0');
    if digits.is_empty() {
        return format!("{sign}0");
    }
    if !(-5..17).contains(&exp) {
        let (head, tail) = digits.split_at(1);
        return if tail.is_empty() {
            format!("{sign}{head}e{exp}")
        } else {
            format!("{sign}{head}.{tail}e{exp}")
        };
    }
    let point = exp + 1;
    if point <= 0 {
        format!("{sign}0.{}{digits}", "0".repeat((-point) as usize))
    } else if point as usize >= digits.len() {
        format!("{sign}{digits}{}", "0".repeat(point as usize - digits.len()))
    } else {
        let (int, frac) = digits.split_at(point as usize);
        format!("{sign}{int}.{frac}")
    }
}

/// One line per matrix row, entries separated by commas.
pub fn to_csv(m: &DenseMatrix) -> String {
    let mut out = String::new();
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&format_g17(m.get(i, j)));
        }
        writeln!(out).unwrap();
    }
    out
}

pub fn export_csv(matrix: impl AsRef<Path>, out: impl AsRef<Path>) -> Result<()> {
    let m = mat_read(matrix)?;
    let out = out.as_ref();
    std::fs::write(out, to_csv(&m)).map_err(|e| Error::io(out, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{gaussian_matrix, Rng};

    #[test]
    fn small_matrices() {
        assert_eq!(to_csv(&DenseMatrix::identity(2)), "1,0\n0,1\n");
        assert_eq!(to_csv(&DenseMatrix::from_row_major(1, 1, &[0.5]).unwrap()), "0.5\n");
    }

    #[test]
    fn renderings() {
        assert_eq!(format_g17(0.0), "0");
        assert_eq!(format_g17(-0.0), "-0");
        assert_eq!(format_g17(-2.5), "-2.5");
        assert_eq!(format_g17(1234.0), "1234");
        assert_eq!(format_g17(0.001), "0.001");
        assert_eq!(format_g17(2f64.powi(-20)), "9.5367431640625e-7");
        assert_eq!(format_g17(1e20), "1e20");
        assert_eq!(format_g17(0.1), "0.10000000000000001");
    }

    #[test]
    fn parse_back_round_trip() {
        let mut rng = Rng::new(5);
        let mut m = gaussian_matrix(7, 9, &mut rng);
        m.set(0, 0, 1e-300);
        m.set(1, 0, -3.2e250);
        m.set(2, 0, 123456789.125);
        let text = to_csv(&m);
        for (i, line) in text.lines().enumerate() {
            for (j, field) in line.split(',').enumerate() {
                let v: f64 = field.parse().unwrap();
                let orig = m.get(i, j);
                assert!((v - orig).abs() <= 1e-15 * orig.abs().max(1.0), "{field} vs {orig}");
            }
        }
    }
}
