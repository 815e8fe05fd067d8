//! CSV and markdown emission. All writers produce '\n' line endings, quote
//! fields RFC-4180 style, and print floats with 9 significant digits so
//! reruns are byte-comparable.

/// 9-significant-digit float rendering (scientific, stable across runs).
pub fn num(x: f64) -> String {
    format!("{:.8e}", x)
}

pub fn int(n: usize) -> String {
    n.to_string()
}

/// Quote a field when it holds a comma, quote, or line break; embedded
/// quotes are doubled.
pub fn field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        let mut out = String::with_capacity(s.len() + 2);
        out.push('"');
        for c in s.chars() {
            if c == '"' {
                out.push('"');
            }
            out.push(c);
        }
        out.push('"');
        out
    } else {
        s.to_string()
    }
}

/// In-memory CSV builder with a fixed header row.
pub struct Csv {
    buf: String,
    width: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut buf = String::new();
        push_row(&mut buf, header.iter().map(|h| field(h)));
        Csv {
            buf,
            width: header.len(),
        }
    }

    pub fn row<I, S>(&mut self, cells: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let cells: Vec<String> = cells.into_iter().map(|c| field(c.as_ref())).collect();
        assert_eq!(cells.len(), self.width, "row width must match the header");
        push_row(&mut self.buf, cells.into_iter());
    }

    /// Convenience for the common two-column quantity/value layout.
    pub fn kv(&mut self, key: &str, value: String) {
        self.row([key.to_string(), value]);
    }

    pub fn finish(self) -> String {
        self.buf
    }
}

fn push_row<I: Iterator<Item = String>>(buf: &mut String, cells: I) {
    let mut first = true;
    for c in cells {
        if !first {
            buf.push(',');
        }
        buf.push_str(&c);
        first = false;
    }
    buf.push('\n');
}

/// Markdown pipe table with the same cell content as a CSV emitter would use.
pub fn markdown_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    out.push('|');
    for h in header {
        out.push(' ');
        out.push_str(h);
        out.push_str(" |");
    }
    out.push('\n');
    out.push('|');
    for _ in header {
        out.push_str(" --- |");
    }
    out.push('\n');
    for r in rows {
        out.push('|');
        for c in r {
            out.push(' ');
            out.push_str(&c.replace('|', "\\|"));
            out.push_str(" |");
        }
        out.push('\n');
    }
    out
}
