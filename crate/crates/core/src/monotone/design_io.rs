//! Design import/export as `x_1,..,x_d,g_value,label` rows.

use std::io::{self, BufRead, Write};

use super::{Label, LabeledDesign};
use crate::error::{Error, Result};

pub fn write_design_csv<W: Write>(design: &LabeledDesign<f64>, mut out: W) -> io::Result<()> {
    let d = design.dimension().unwrap_or(0);
    let mut header: Vec<String> = (1..=d).map(|i| format!("x_{i}")).collect();
    header.push("g_value".into());
    header.push("label".into());
    writeln!(out, "{}", header.join(","))?;
    for ((p, v), l) in design.points.iter().zip(&design.values).zip(&design.labels) {
        for x in p {
            write!(out, "{x},")?;
        }
        let label = match l {
            Label::Fail => "fail",
            Label::Safe => "safe",
        };
        writeln!(out, "{v},{label}")?;
    }
    Ok(())
}

/// Parse a design; rows are checked for monotonicity consistency as they
/// are appended.
pub fn read_design_csv<R: BufRead>(input: R) -> Result<LabeledDesign<f64>> {
    let mut lines = input.lines().enumerate();
    let parse_err = |line: usize, message: String| Error::Parse { line, message };
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty design file".into()))?;
    let header = header.map_err(|e| parse_err(1, e.to_string()))?;
    let columns: Vec<&str> = header.trim().split(',').collect();
    if columns.len() < 3 || columns[columns.len() - 2] != "g_value" || columns[columns.len() - 1] != "label" {
        return Err(parse_err(1, "header must be x_1,..,x_d,g_value,label".into()));
    }
    let d = columns.len() - 2;
    let mut design = LabeledDesign::new();
    for (i, line) in lines {
        let line_no = i + 1;
        let line = line.map_err(|e| parse_err(line_no, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != d + 2 {
            return Err(parse_err(
                line_no,
                format!("expected {} fields, found {}", d + 2, fields.len()),
            ));
        }
        let nums: std::result::Result<Vec<f64>, _> = fields[..=d].iter().map(|f| f.trim().parse::<f64>()).collect();
        let nums = nums.map_err(|e| parse_err(line_no, e.to_string()))?;
        let label = match fields[d + 1].trim() {
            "fail" => Label::Fail,
            "safe" => Label::Safe,
            other => return Err(parse_err(line_no, format!("unknown label `{other}`"))),
        };
        design.push(nums[..d].to_vec(), nums[d], label)?;
    }
    Ok(design)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn write_then_read() {
        let mut design = LabeledDesign::new();
        design.push(vec![0.25, 0.1], -0.5, Label::Fail).unwrap();
        design.push(vec![0.75, 0.9], 0.5, Label::Safe).unwrap();
        let mut buf = Vec::new();
        write_design_csv(&design, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x_1,x_2,g_value,label\n0.25,0.1,-0.5,fail\n"));
        let back = read_design_csv(&buf[..]).unwrap();
        assert_eq!(back, design);
    }

    #[test]
    fn bad_rows_report_line() {
        let text = "x_1,g_value,label\n0.5,1.0,safe\n0.2,oops,fail\n";
        match read_design_csv(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let text = "x_1,g_value,label\n0.2,1.0,safe\n0.5,-1.0,fail\n";
        assert!(matches!(
            read_design_csv(text.as_bytes()),
            Err(Error::MonotonicityViolation { .. })
        ));
    }
}
