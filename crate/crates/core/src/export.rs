//! Printed-table presentation: two-decimal display values and CSV grids.

use crate::tables::{CellState, CombiningTable, GridIndex};

// Products of grid levels land a few ulps either side of exact ties; treat
// anything this close to a half as the tie itself.
const TIE_EPSILON: f64 = 1e-9;

/// Rounds to two decimals, ties away from zero.
pub fn round_half_up(value: f64) -> f64 {
    let scaled = value.abs() * 100.0;
    let rounded = (scaled + 0.5 + TIE_EPSILON).floor();
    let r = rounded.copysign(value) / 100.0;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

fn strip_leading_zero(s: String) -> String {
    if let Some(rest) = s.strip_prefix("0.") {
        format!(".{rest}")
    } else if let Some(rest) = s.strip_prefix("-0.") {
        format!("-.{rest}")
    } else {
        s
    }
}

/// Display form of a stored value: `.91`, `-.75`, `1.00`, `0`.
pub fn display_value(value: f64) -> String {
    let r = round_half_up(value);
    if r == 0.0 {
        "0".to_string()
    } else {
        strip_leading_zero(format!("{r:.2}"))
    }
}

/// Display form of an axis level at full precision: `.875`, `-.25`, `1`.
pub fn display_level(level: f64) -> String {
    strip_leading_zero(format!("{level}"))
}

fn field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn render(table: &CombiningTable, cell: impl Fn(&CellState) -> String) -> String {
    let axes = table.axes();
    let mut out = String::new();
    let mut line = |fields: Vec<String>| {
        out.push_str(&fields.join(","));
        out.push('\n');
    };
    let at = |index: &GridIndex| cell(table.cell(index).expect("index in range"));

    let cols = &axes[0];
    if axes.len() == 1 {
        let mut header = vec![field(cols.proposition())];
        header.extend(cols.levels().iter().map(|&l| display_level(l)));
        line(header);
        let mut row = vec![field(table.conclusion())];
        row.extend((0..cols.len()).map(|c| at(&vec![c])));
        line(row);
        return out;
    }

    let rows = &axes[1];
    let rest = &axes[2..];
    let slices: usize = rest.iter().map(|a| a.len()).product();
    for mut s in 0..slices {
        let mut tail = vec![0; rest.len()];
        for (slot, axis) in tail.iter_mut().zip(rest).rev() {
            *slot = s % axis.len();
            s /= axis.len();
        }
        if !rest.is_empty() {
            let label: Vec<String> = rest
                .iter()
                .zip(&tail)
                .map(|(a, &i)| format!("{}={}", a.proposition(), display_level(a.levels()[i])))
                .collect();
            line(vec![field(&label.join(" "))]);
        }
        let mut header = vec![field(&format!("{}\\{}", rows.proposition(), cols.proposition()))];
        header.extend(cols.levels().iter().map(|&l| display_level(l)));
        line(header);
        for (r, &level) in rows.levels().iter().enumerate() {
            let mut row = vec![display_level(level)];
            for c in 0..cols.len() {
                let mut index = vec![c, r];
                index.extend(&tail);
                row.push(at(&index));
            }
            line(row);
        }
    }
    out
}

/// Values grid: columns follow the first axis, rows the second, both
/// descending; further axes produce one labelled block per slice. Blank
/// cells are empty fields.
pub fn export_csv(table: &CombiningTable) -> String {
    render(table, |c| c.value().map(display_value).unwrap_or_default())
}

/// Same layout as [`export_csv`] with one-letter provenance codes.
pub fn export_provenance_csv(table: &CombiningTable) -> String {
    render(table, |c| c.provenance().code().to_string())
}
