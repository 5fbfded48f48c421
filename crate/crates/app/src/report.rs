//! Plain-text rendering of a benchmark report, one row per query and a
//! closing average row, followed by the graded top-k of every run.

use std::fmt::Write;

use create_core::eval::{BenchmarkReport, System};

pub fn render(report: &BenchmarkReport) -> String {
    let mut out = String::new();
    let header = ["query", "structured", "unstructured", "combined"];
    let _ = writeln!(out, "P@{} (corpus seed {})", report.k, report.corpus_seed);
    let _ = writeln!(out, "{:<8}{:>12}{:>14}{:>10}", header[0], header[1], header[2], header[3]);
    for q in &report.queries {
        let p = |s| q.systems.get(s).p_at_k;
        let _ = writeln!(
            out,
            "{:<8}{:>12.2}{:>14.2}{:>10.2}",
            q.query_id,
            p(System::Structured),
            p(System::Unstructured),
            p(System::Combined)
        );
    }
    let a = &report.averages;
    let _ = writeln!(
        out,
        "{:<8}{:>12.2}{:>14.2}{:>10.2}",
        "average", a.structured, a.unstructured, a.combined
    );
    out.push('\n');
    for q in &report.queries {
        for s in System::ALL {
            let r = q.systems.get(s);
            let grades: Vec<String> = r.ranked.iter().zip(&r.grades).map(|(p, g)| format!("{p}:{g}")).collect();
            let _ = writeln!(out, "{:<8}{:<14}{}", q.query_id, s.as_str(), grades.join(" "));
        }
    }
    out
}
