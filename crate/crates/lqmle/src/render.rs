//! Plain-text and Markdown tables from JSON reports.

use std::fmt::Write as _;

use serde_json::Value;

use crate::error::{CliError, Result};

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn show(&self, markdown: bool) -> String {
        let mut out = String::new();
        if markdown {
            writeln!(out, "| {} |", self.header.join(" | ")).unwrap();
            writeln!(out, "|{}", "---|".repeat(self.header.len())).unwrap();
            for r in &self.rows {
                writeln!(out, "| {} |", r.join(" | ")).unwrap();
            }
            return out;
        }
        let mut widths: Vec<usize> = self.header.iter().map(|h| h.chars().count()).collect();
        for r in &self.rows {
            for (w, c) in widths.iter_mut().zip(r) {
                *w = (*w).max(c.chars().count());
            }
        }
        let line = |cells: &[String]| {
            cells
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c:>w$}"))
                .collect::<Vec<_>>()
                .join("  ")
        };
        writeln!(out, "{}", line(&self.header)).unwrap();
        writeln!(
            out,
            "{}",
            "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1))
        )
        .unwrap();
        for r in &self.rows {
            writeln!(out, "{}", line(r)).unwrap();
        }
        out
    }
}

fn fmt(v: &Value) -> String {
    match v {
        Value::Null => "-".into(),
        Value::Number(n) if n.is_f64() => format!("{:.4}", n.as_f64().unwrap()),
        Value::Number(n) => n.to_string(),
        Value::String(s) => s.clone(),
        Value::Bool(b) => b.to_string(),
        other => other.to_string(),
    }
}

fn heading(out: &mut String, text: &str, markdown: bool) {
    if markdown {
        writeln!(out, "## {text}\n").unwrap();
    } else {
        writeln!(out, "{text}\n{}", "=".repeat(text.chars().count())).unwrap();
    }
}

fn line(out: &mut String, key: &str, v: &Value, markdown: bool) {
    if markdown {
        writeln!(out, "- {key}: {}", fmt(v)).unwrap();
    } else {
        writeln!(out, "{key:<14}{}", fmt(v)).unwrap();
    }
}

pub fn render(v: &Value, markdown: bool) -> Result<String> {
    let kind = v["kind"]
        .as_str()
        .ok_or_else(|| CliError::Config("report has no \"kind\" field".into()))?;
    let mut out = String::new();
    match kind {
        "fit" | "test" => {
            fit_section(&mut out, v, markdown);
            if kind == "test" && !v["wald"].is_null() {
                let mut t = Table::new(&["test", "statistic", "df", "p-value", "reject"]);
                for name in ["wald", "lm"] {
                    let r = &v[name];
                    t.rows.push(vec![
                        name.to_uppercase(),
                        fmt(&r["statistic"]),
                        fmt(&r["df"]),
                        fmt(&r["p_value"]),
                        fmt(&r["reject"]),
                    ]);
                }
                out.push('\n');
                out.push_str(&t.show(markdown));
                line(&mut out, "LR (descr.)", &v["lr_descriptive"], markdown);
            }
        }
        "diagnose" => {
            heading(
                &mut out,
                &format!("{} diagnostics, n = {}", fmt(&v["model"]), fmt(&v["n"])),
                markdown,
            );
            diagnostics_section(&mut out, &v["diagnostics"], markdown);
        }
        "calibrate" => {
            heading(&mut out, "Calibrated constants", markdown);
            let mut t = Table::new(&["family", "parameter", "value", "psi", "|psi - 1|"]);
            for c in v["constants"].as_array().into_iter().flatten() {
                t.rows.push(vec![
                    fmt(&c["family"]),
                    fmt(&c["parameter"]),
                    fmt(&c["value"]),
                    format!("{:.8}", c["psi"].as_f64().unwrap_or(f64::NAN)),
                    format!("{:.2e}", c["abs_error"].as_f64().unwrap_or(f64::NAN)),
                ]);
            }
            out.push_str(&t.show(markdown));
        }
        "mc" => mc_section(&mut out, v, markdown),
        "simulate" => {
            heading(&mut out, "Simulated series", markdown);
            line(&mut out, "model", &v["model"], markdown);
            line(&mut out, "n", &v["n"], markdown);
            line(&mut out, "seed", &v["manifest"]["seed"], markdown);
        }
        other => return Err(CliError::Config(format!("unknown report kind {other:?}"))),
    }
    Ok(out)
}

fn fit_section(out: &mut String, v: &Value, markdown: bool) {
    heading(
        out,
        &format!(
            "{} ({} objective), n = {}",
            fmt(&v["model"]),
            fmt(&v["objective"]),
            fmt(&v["n"])
        ),
        markdown,
    );
    let mut t = Table::new(&["", "estimate", "ASD", "t", "p-value"]);
    for c in v["coefficients"].as_array().into_iter().flatten() {
        t.rows.push(vec![
            fmt(&c["name"]),
            fmt(&c["estimate"]),
            fmt(&c["asd"]),
            fmt(&c["t"]),
            fmt(&c["p_value"]),
        ]);
    }
    out.push_str(&t.show(markdown));
    out.push('\n');
    line(out, "loglik", &v["loglik"], markdown);
    line(out, "converged", &v["converged"], markdown);
    if !v["diagnostics"].is_null() {
        diagnostics_section(out, &v["diagnostics"], markdown);
    }
}

fn diagnostics_section(out: &mut String, d: &Value, markdown: bool) {
    line(out, "AIC", &d["aic"], markdown);
    let st = &d["stationarity"];
    if st.is_null() {
        line(out, "stationarity", &Value::Null, markdown);
    } else {
        let key = if st["kind"] == "lyapunov" { "Lyapunov" } else { "margin" };
        line(out, key, &st["value"], markdown);
    }
    line(out, &format!("Hill (k={})", fmt(&d["hill_k"])), &d["hill"], markdown);
    line(out, "psi(eta)", &d["psi_hat"], markdown);
    for f in d["flags"].as_array().into_iter().flatten() {
        line(out, "flag", f, markdown);
    }
}

fn mc_section(out: &mut String, v: &Value, markdown: bool) {
    let cells = v["cells"].as_array().cloned().unwrap_or_default();
    let mut groups: Vec<String> = Vec::new();
    for c in &cells {
        let g = fmt(&c["scenario"]);
        if !groups.contains(&g) {
            groups.push(g);
        }
    }
    for g in groups {
        let mine: Vec<&Value> = cells.iter().filter(|c| fmt(&c["scenario"]) == g).collect();
        heading(out, &format!("{g}: {}", fmt(&mine[0]["model"])), markdown);
        let names: Vec<String> = mine
            .iter()
            .find_map(|c| c["coefficients"].as_array())
            .map(|cs| cs.iter().map(|c| fmt(&c["name"])).collect())
            .unwrap_or_default();
        let mut header = vec![
            "n".to_string(),
            "dist".into(),
            "estimator".into(),
            "alt".into(),
            "".into(),
        ];
        header.extend(names.iter().cloned());
        let mut est = Table {
            header,
            rows: Vec::new(),
        };
        for c in &mine {
            let key = [
                fmt(&c["n"]),
                fmt(&c["dist"]["label"]),
                fmt(&c["estimator"]),
                fmt(&c["alternative_scale"]),
            ];
            if !c["error"].is_null() {
                let mut row = key.to_vec();
                row.push("error".into());
                row.push(fmt(&c["error"]["message"]));
                row.resize(est.header.len(), String::new());
                est.rows.push(row);
                continue;
            }
            for (label, field) in [("bias", "bias"), ("SD", "sd")] {
                let mut row = key.to_vec();
                row.push(label.into());
                for coef in c["coefficients"].as_array().into_iter().flatten() {
                    row.push(fmt(&coef[field]));
                }
                est.rows.push(row);
            }
        }
        out.push_str(&est.show(markdown));
        let tested: Vec<&&Value> = mine.iter().filter(|c| !c["wald"].is_null()).collect();
        if !tested.is_empty() {
            let mut alts: Vec<String> = Vec::new();
            for c in &tested {
                let a = fmt(&c["alternative_scale"]);
                if !alts.contains(&a) {
                    alts.push(a);
                }
            }
            let mut header = vec!["n".to_string(), "dist".into(), "estimator".into(), "test".into()];
            header.extend(alts.iter().map(|a| format!("alt {a}")));
            let mut t = Table {
                header,
                rows: Vec::new(),
            };
            let mut keys: Vec<[String; 3]> = Vec::new();
            for c in &tested {
                let k = [fmt(&c["n"]), fmt(&c["dist"]["label"]), fmt(&c["estimator"])];
                if !keys.contains(&k) {
                    keys.push(k);
                }
            }
            for k in &keys {
                for test in ["wald", "lm"] {
                    let mut row = k.to_vec();
                    row.push(test.to_uppercase());
                    for a in &alts {
                        let cell = tested.iter().find(|c| {
                            [fmt(&c["n"]), fmt(&c["dist"]["label"]), fmt(&c["estimator"])] == *k
                                && fmt(&c["alternative_scale"]) == *a
                        });
                        row.push(cell.map(|c| fmt(&c[test]["rate"])).unwrap_or_else(|| "-".into()));
                    }
                    t.rows.push(row);
                }
            }
            out.push('\n');
            out.push_str(&t.show(markdown));
        }
        out.push('\n');
    }
}
