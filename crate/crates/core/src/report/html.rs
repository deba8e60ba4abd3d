//! Single-page HTML rendering with inline SVG charts.
//!
//! Layout: repository information on the left, activeness, security,
//! support, legal and the three charts in the middle, community interest in
//! the top-right corner. The page loads nothing from the network.

use std::fmt::Write;

use crate::classifier::ActivityLabel;
use crate::fixed::Fixed2;
use crate::maturity::ActivityPair;

use super::AssessmentReport;

const CORRECTIVE_COLOR: &str = "#d62728";
const PERFECTIVE_COLOR: &str = "#f2c12e";
const ADAPTIVE_COLOR: &str = "#1f77b4";
const UNCLASSIFIED_COLOR: &str = "#9e9e9e";
const ADDITIONS_COLOR: &str = "#2ca02c";
const DELETIONS_COLOR: &str = "#8c564b";

const CHART_WIDTH: f64 = 760.0;
const CHART_HEIGHT: f64 = 260.0;
const MARGIN_LEFT: f64 = 48.0;
const MARGIN_RIGHT: f64 = 12.0;
const MARGIN_TOP: f64 = 16.0;
const MARGIN_BOTTOM: f64 = 56.0;
/// Vertical gap separating the unclassified segment from the stack.
const UNCLASSIFIED_GAP: f64 = 3.0;

const STYLE: &str = "
body{font-family:system-ui,-apple-system,'Segoe UI',sans-serif;margin:0;background:#f4f5f7;color:#222}
header{display:flex;justify-content:space-between;align-items:flex-start;padding:16px 24px;background:#fff;border-bottom:1px solid #ddd}
header h1{margin:0 0 4px 0;font-size:1.6em}
header p{margin:0;color:#555}
.layout{display:grid;grid-template-columns:280px 1fr;gap:16px;padding:16px 24px}
.panel{background:#fff;border:1px solid #ddd;border-radius:6px;padding:12px 16px;margin-bottom:16px}
.panel h2{font-size:1.05em;margin:0 0 8px 0;border-bottom:1px solid #eee;padding-bottom:4px}
dl{display:grid;grid-template-columns:auto 1fr;gap:4px 12px;margin:0}
dt{color:#666}
dd{margin:0;font-variant-numeric:tabular-nums}
.unavailable{color:#999;font-style:italic}
.community{display:flex;gap:16px}
.community div{text-align:center}
.community .value{font-size:1.4em;font-weight:600}
.metrics{display:grid;grid-template-columns:repeat(auto-fit,minmax(260px,1fr));gap:16px}
table{border-collapse:collapse;width:100%;font-size:.9em}
th,td{text-align:left;padding:3px 6px;border-bottom:1px solid #eee}
.sev-critical{color:#8b0000;font-weight:600}
.sev-high{color:#c0392b}
.sev-medium{color:#d68910}
.legend span{display:inline-block;margin-right:12px;font-size:.85em}
.legend i{display:inline-block;width:10px;height:10px;margin-right:4px}
.notice{padding:24px;text-align:center;color:#666;background:#fafafa;border:1px dashed #ccc}
svg text{font-size:10px;fill:#444}
footer{padding:8px 24px 24px;color:#777;font-size:.85em}
";

/// Render the report as one self-contained HTML document.
pub fn to_html(report: &AssessmentReport) -> Vec<u8> {
    let mut out = String::with_capacity(32 * 1024);
    let title = if report.repo_metadata.name.is_empty() {
        report.source.as_str()
    } else {
        report.repo_metadata.name.as_str()
    };

    out.push_str("<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n");
    let _ = writeln!(out, "<title>{} - repository assessment</title>", esc(title));
    let _ = writeln!(out, "<style>{STYLE}</style>\n</head>\n<body>");

    // Header with community interest in the top-right corner.
    out.push_str("<header>\n<div>\n");
    let _ = writeln!(out, "<h1>{}</h1>", esc(title));
    let _ = writeln!(out, "<p>{}</p>", esc(&report.source));
    out.push_str("</div>\n");
    community_panel(&mut out, report);
    out.push_str("</header>\n<div class=\"layout\">\n<aside>\n");
    repository_panel(&mut out, report);
    out.push_str("</aside>\n<main>\n<div class=\"metrics\">\n");
    activeness_panel(&mut out, report);
    security_panel(&mut out, report);
    support_panel(&mut out, report);
    legal_panel(&mut out, report);
    out.push_str("</div>\n");

    if report.profiles.is_empty() {
        out.push_str(
            "<section class=\"panel\" id=\"charts\">\n<h2>Commit analysis</h2>\n\
             <p class=\"notice\">No releases found: commit activity, classification and maturity charts need at least one release tag.</p>\n</section>\n",
        );
    } else {
        activity_chart(&mut out, report);
        classification_chart(&mut out, report);
        maturity_chart(&mut out, report);
    }

    out.push_str("</main>\n</div>\n<footer>\n");
    if !report.warnings.is_empty() {
        out.push_str("<details><summary>Warnings</summary>\n<ul>\n");
        for w in &report.warnings {
            let _ = writeln!(out, "<li>{}</li>", esc(w));
        }
        out.push_str("</ul>\n</details>\n");
    }
    let _ = writeln!(
        out,
        "<p>Generated {} &middot; schema version {}</p>",
        report.generated_at.format("%Y-%m-%d %H:%M:%S UTC"),
        esc(&report.schema_version)
    );
    out.push_str("</footer>\n</body>\n</html>\n");
    out.into_bytes()
}

fn esc(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for ch in text.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

fn is_unavailable(report: &AssessmentReport, field: &str) -> bool {
    report.unavailable.iter().any(|u| u == field || field.starts_with(&format!("{u}.")))
}

fn field(out: &mut String, report: &AssessmentReport, path: &str, label: &str, value: &str) {
    if is_unavailable(report, path) {
        let _ = writeln!(out, "<dt>{label}</dt><dd class=\"unavailable\">unavailable</dd>");
    } else {
        let _ = writeln!(out, "<dt>{label}</dt><dd>{}</dd>", esc(value));
    }
}

fn community_panel(out: &mut String, report: &AssessmentReport) {
    out.push_str("<section class=\"community\" id=\"community-interest\">\n");
    let c = &report.community;
    for (label, path, value) in [
        ("Stars", "community.stars", c.stars),
        ("Forks", "community.forks", c.forks),
        ("Watchers", "community.watchers", c.watchers),
    ] {
        let shown = if is_unavailable(report, path) {
            "&ndash;".to_string()
        } else {
            value.to_string()
        };
        let _ = writeln!(out, "<div><div class=\"value\">{shown}</div>{label}</div>");
    }
    out.push_str("</section>\n");
}

fn repository_panel(out: &mut String, report: &AssessmentReport) {
    let m = &report.repo_metadata;
    out.push_str("<section class=\"panel\" id=\"repository-information\">\n<h2>Repository information</h2>\n<dl>\n");
    field(out, report, "repo_metadata.name", "Name", &m.name);
    field(out, report, "repo_metadata.description", "Description", &m.description);
    field(out, report, "repo_metadata.topics", "Topics", &m.topics.join(", "));
    field(out, report, "repo_metadata.api_url", "API URL", &m.api_url);
    let health = m
        .community_health_pct
        .map(|p| format!("{p}%"))
        .unwrap_or_default();
    field(out, report, "repo_metadata.community_health_pct", "Community health", &health);
    out.push_str("</dl>\n");

    out.push_str("<h2>Languages</h2>\n");
    if is_unavailable(report, "repo_metadata.languages") {
        out.push_str("<p class=\"unavailable\">unavailable</p>\n");
    } else {
        let total: u64 = m.languages.values().sum();
        let mut langs: Vec<(&String, &u64)> = m.languages.iter().collect();
        langs.sort_by(|a, b| b.1.cmp(a.1).then_with(|| a.0.cmp(b.0)));
        out.push_str("<table>\n");
        for (name, bytes) in langs {
            let _ = writeln!(
                out,
                "<tr><td>{}</td><td>{}%</td></tr>",
                esc(name),
                Fixed2::from_ratio(bytes * 100, total.max(1))
            );
        }
        out.push_str("</table>\n");
    }
    out.push_str("</section>\n");
}

fn activeness_panel(out: &mut String, report: &AssessmentReport) {
    let m = &report.mining;
    out.push_str("<section class=\"panel\" id=\"repository-activeness\">\n<h2>Repository activeness</h2>\n<dl>\n");
    field(out, report, "mining.repo_age_days", "Age", &format!("{} days", m.repo_age_days));
    let updated = m
        .last_updated
        .map(|t| t.format("%Y-%m-%d").to_string())
        .unwrap_or_else(|| "never".into());
    field(out, report, "mining.last_updated", "Last updated", &updated);
    field(
        out,
        report,
        "mining.avg_days_between_releases",
        "Average time to release",
        &format!("{} days", m.avg_days_between_releases),
    );
    field(
        out,
        report,
        "repo_metadata.open_issues",
        "Open issues",
        &report.repo_metadata.open_issues.to_string(),
    );
    field(out, report, "mining.release_count", "Releases", &m.release_count.to_string());
    field(out, report, "mining.total_commits", "Commits", &m.total_commits.to_string());
    field(
        out,
        report,
        "mining.total_additions",
        "Lines added / deleted",
        &format!("+{} / -{}", m.total_additions, m.total_deletions),
    );
    let s = &report.maturity;
    field(
        out,
        report,
        "maturity.total_crossovers",
        "Commit maturity",
        &format!(
            "{} crossovers over {} releases ({})",
            s.total_crossovers, s.release_count, s.maturity_ratio
        ),
    );
    out.push_str("</dl>\n");
    if !report.releases.is_empty() {
        out.push_str("<h2>Recent releases</h2>\n<table>\n");
        for r in report.releases.iter().rev().take(5) {
            let _ = writeln!(
                out,
                "<tr><td>{}</td><td>{}</td><td>{} commits</td></tr>",
                esc(&r.tag_name),
                r.tag_timestamp.format("%Y-%m-%d"),
                r.commits
            );
        }
        out.push_str("</table>\n");
    }
    out.push_str("</section>\n");
}

fn security_panel(out: &mut String, report: &AssessmentReport) {
    out.push_str("<section class=\"panel\" id=\"security\">\n<h2>Security</h2>\n");
    if is_unavailable(report, "vulnerabilities") {
        out.push_str("<p class=\"unavailable\">vulnerability scan unavailable</p>\n");
    } else if report.vulnerabilities.is_empty() {
        out.push_str("<p>No known vulnerabilities in direct dependencies.</p>\n");
    } else {
        let _ = writeln!(out, "<p>{} advisories</p>", report.vulnerabilities.len());
        out.push_str("<table>\n<tr><th>Advisory</th><th>Package</th><th>Severity</th></tr>\n");
        for v in &report.vulnerabilities {
            let _ = writeln!(
                out,
                "<tr title=\"{}\"><td>{}</td><td>{}</td><td class=\"sev-{}\">{}</td></tr>",
                esc(&v.summary),
                esc(&v.advisory_id),
                esc(&v.affected_package),
                v.severity,
                v.severity
            );
        }
        out.push_str("</table>\n");
    }
    out.push_str("</section>\n");
}

fn support_panel(out: &mut String, report: &AssessmentReport) {
    let s = &report.support;
    out.push_str("<section class=\"panel\" id=\"support\">\n<h2>Support</h2>\n<dl>\n");
    let tag = if report.support_tag_defaulted {
        format!("{} (derived from repository name)", s.tag)
    } else {
        s.tag.clone()
    };
    field(out, report, "support.tag", "Stack Overflow tag", &tag);
    field(out, report, "support.question_count", "Questions", &s.question_count.to_string());
    field(out, report, "support.answered_count", "Answered", &s.answered_count.to_string());
    out.push_str("</dl>\n</section>\n");
}

fn legal_panel(out: &mut String, report: &AssessmentReport) {
    let l = &report.license;
    out.push_str("<section class=\"panel\" id=\"legal\">\n<h2>Legal requirements</h2>\n<dl>\n");
    field(out, report, "license.spdx_id", "License", &l.spdx_id);
    field(out, report, "license.terms", "Permissions", &l.permissions.join(", "));
    field(out, report, "license.terms", "Conditions", &l.conditions.join(", "));
    field(out, report, "license.terms", "Limitations", &l.limitations.join(", "));
    out.push_str("</dl>\n</section>\n");
}

/// Horizontal geometry shared by the charts: one slot per release.
struct Slots {
    count: usize,
}

impl Slots {
    fn plot_width() -> f64 {
        CHART_WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    }

    fn width(&self) -> f64 {
        Self::plot_width() / self.count.max(1) as f64
    }

    fn left(&self, i: usize) -> f64 {
        MARGIN_LEFT + self.width() * i as f64
    }

    fn center(&self, i: usize) -> f64 {
        self.left(i) + self.width() / 2.0
    }

    /// Draw every k-th tick label so long histories stay readable.
    fn label_step(&self) -> usize {
        (self.count as f64 / 40.0).ceil().max(1.0) as usize
    }
}

fn plot_height() -> f64 {
    CHART_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
}

fn y_for(value: f64, max: f64) -> f64 {
    MARGIN_TOP + plot_height() * (1.0 - value / max)
}

fn open_svg(out: &mut String, id: &str, label: &str) {
    let _ = writeln!(
        out,
        "<svg id=\"{id}\" role=\"img\" aria-label=\"{label}\" viewBox=\"0 0 {CHART_WIDTH} {CHART_HEIGHT}\" width=\"100%\">"
    );
}

fn axes(out: &mut String, max: f64) {
    let base = MARGIN_TOP + plot_height();
    let _ = writeln!(
        out,
        "<line x1=\"{MARGIN_LEFT}\" y1=\"{base:.1}\" x2=\"{:.1}\" y2=\"{base:.1}\" stroke=\"#888\"/>",
        CHART_WIDTH - MARGIN_RIGHT
    );
    let _ = writeln!(
        out,
        "<line x1=\"{MARGIN_LEFT}\" y1=\"{MARGIN_TOP}\" x2=\"{MARGIN_LEFT}\" y2=\"{base:.1}\" stroke=\"#888\"/>"
    );
    for step in 0..=4 {
        let value = max * step as f64 / 4.0;
        let y = y_for(value, max);
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>",
            MARGIN_LEFT - 4.0,
            y + 3.0,
            value.round() as u64
        );
    }
}

fn release_labels(out: &mut String, report: &AssessmentReport, slots: &Slots) {
    let base = MARGIN_TOP + plot_height();
    for (i, r) in report.releases.iter().enumerate() {
        if i % slots.label_step() != 0 {
            continue;
        }
        let x = slots.center(i);
        let y = base + 10.0;
        let _ = writeln!(
            out,
            "<text x=\"{x:.1}\" y=\"{y:.1}\" text-anchor=\"end\" transform=\"rotate(-45 {x:.1} {y:.1})\">{}</text>",
            esc(&r.tag_name)
        );
    }
}

fn legend(out: &mut String, items: &[(&str, &str)]) {
    out.push_str("<div class=\"legend\">");
    for (color, label) in items {
        let _ = write!(out, "<span><i style=\"background:{color}\"></i>{label}</span>");
    }
    out.push_str("</div>\n");
}

fn activity_chart(out: &mut String, report: &AssessmentReport) {
    let slots = Slots {
        count: report.releases.len(),
    };
    let max = report
        .releases
        .iter()
        .map(|r| r.additions.max(r.deletions))
        .max()
        .unwrap_or(0)
        .max(1) as f64;
    out.push_str("<section class=\"panel\" id=\"commit-activity\">\n<h2>Commit activity</h2>\n");
    legend(out, &[(ADDITIONS_COLOR, "additions"), (DELETIONS_COLOR, "deletions")]);
    open_svg(out, "commit-activity-chart", "Lines added and deleted per release");
    axes(out, max);
    let bar = slots.width() * 0.4;
    for (i, r) in report.releases.iter().enumerate() {
        let _ = writeln!(out, "<g class=\"activity-group\" data-ordinal=\"{i}\">");
        let _ = writeln!(
            out,
            "<title>{}: +{} / -{} in {} commits</title>",
            esc(&r.tag_name),
            r.additions,
            r.deletions,
            r.commits
        );
        for (offset, value, color) in [(0.1, r.additions, ADDITIONS_COLOR), (0.5, r.deletions, DELETIONS_COLOR)] {
            let top = y_for(value as f64, max);
            let _ = writeln!(
                out,
                "<rect x=\"{:.1}\" y=\"{top:.1}\" width=\"{bar:.1}\" height=\"{:.1}\" fill=\"{color}\"/>",
                slots.left(i) + slots.width() * offset,
                MARGIN_TOP + plot_height() - top
            );
        }
        out.push_str("</g>\n");
    }
    release_labels(out, report, &slots);
    out.push_str("</svg>\n</section>\n");
}

fn classification_chart(out: &mut String, report: &AssessmentReport) {
    let slots = Slots {
        count: report.profiles.len(),
    };
    let max = report
        .profiles
        .iter()
        .map(|p| p.total())
        .max()
        .unwrap_or(0)
        .max(1) as f64;
    let scale = plot_height() / max;
    out.push_str("<section class=\"panel\" id=\"commit-classification\">\n<h2>Commit classification</h2>\n");
    legend(
        out,
        &[
            (CORRECTIVE_COLOR, "corrective"),
            (PERFECTIVE_COLOR, "perfective"),
            (ADAPTIVE_COLOR, "adaptive"),
            (UNCLASSIFIED_COLOR, "unclassified"),
        ],
    );
    open_svg(out, "commit-classification-chart", "Maintenance activities per release");
    axes(out, max);
    let bar = slots.width() * 0.7;
    for (i, p) in report.profiles.iter().enumerate() {
        let tag = report.releases.get(i).map_or("", |r| r.tag_name.as_str());
        let _ = writeln!(out, "<g class=\"bar-group\" data-ordinal=\"{}\">", p.ordinal);
        let _ = writeln!(
            out,
            "<title>{}: corrective {}, perfective {}, adaptive {}, unclassified {}</title>",
            esc(tag),
            p.corrective,
            p.perfective,
            p.adaptive,
            p.unclassified
        );
        let x = slots.left(i) + slots.width() * 0.15;
        let mut top = MARGIN_TOP + plot_height();
        for (label, color) in [
            (ActivityLabel::Corrective, CORRECTIVE_COLOR),
            (ActivityLabel::Perfective, PERFECTIVE_COLOR),
            (ActivityLabel::Adaptive, ADAPTIVE_COLOR),
            (ActivityLabel::Unclassified, UNCLASSIFIED_COLOR),
        ] {
            let count = p.count(label);
            if count == 0 {
                continue;
            }
            let mut height = count as f64 * scale;
            if label == ActivityLabel::Unclassified && top < MARGIN_TOP + plot_height() {
                top -= UNCLASSIFIED_GAP.min(height / 2.0);
                height -= UNCLASSIFIED_GAP.min(height / 2.0);
            }
            top -= height;
            let _ = writeln!(
                out,
                "<rect class=\"segment {label}\" x=\"{x:.1}\" y=\"{top:.1}\" width=\"{bar:.1}\" height=\"{height:.1}\" fill=\"{color}\"/>"
            );
        }
        out.push_str("</g>\n");
    }
    release_labels(out, report, &slots);
    out.push_str("</svg>\n</section>\n");
}

fn series_color(label: ActivityLabel) -> &'static str {
    match label {
        ActivityLabel::Corrective => CORRECTIVE_COLOR,
        ActivityLabel::Adaptive => ADAPTIVE_COLOR,
        ActivityLabel::Perfective => PERFECTIVE_COLOR,
        ActivityLabel::Unclassified => UNCLASSIFIED_COLOR,
    }
}

fn maturity_chart(out: &mut String, report: &AssessmentReport) {
    let profiles = &report.profiles;
    let slots = Slots {
        count: profiles.len(),
    };
    let max = profiles
        .iter()
        .map(|p| p.corrective.max(p.adaptive).max(p.perfective))
        .max()
        .unwrap_or(0)
        .max(1) as f64;
    let s = &report.maturity;

    out.push_str("<section class=\"panel\" id=\"commit-maturity\">\n<h2>Commit maturity</h2>\n");
    let _ = writeln!(
        out,
        "<p>{} crossovers over {} releases (ratio {}): adaptive/corrective {}, adaptive/perfective {}, corrective/perfective {}</p>",
        s.total_crossovers,
        s.release_count,
        s.maturity_ratio,
        s.count(ActivityPair::AdaptiveCorrective),
        s.count(ActivityPair::AdaptivePerfective),
        s.count(ActivityPair::CorrectivePerfective)
    );
    legend(
        out,
        &[
            (CORRECTIVE_COLOR, "corrective"),
            (PERFECTIVE_COLOR, "perfective"),
            (ADAPTIVE_COLOR, "adaptive"),
            ("#000", "crossover"),
        ],
    );
    open_svg(out, "commit-maturity-chart", "Activity series with crossover points");
    axes(out, max);
    for label in ActivityLabel::ACTIVITIES {
        let points: Vec<String> = profiles
            .iter()
            .enumerate()
            .map(|(i, p)| format!("{:.1},{:.1}", slots.center(i), y_for(p.count(label) as f64, max)))
            .collect();
        let _ = writeln!(
            out,
            "<polyline class=\"series {label}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\" points=\"{}\"/>",
            series_color(label),
            points.join(" ")
        );
    }
    for event in &report.crossovers {
        let Some(i) = profiles.iter().position(|p| p.ordinal == event.at_ordinal) else {
            continue;
        };
        let (x_label, y_label) = event.pair.series();
        let p = &profiles[i];
        let mid = (p.count(x_label) + p.count(y_label)) as f64 / 2.0;
        let tag = report.releases.get(i).map_or("", |r| r.tag_name.as_str());
        let _ = writeln!(
            out,
            "<circle class=\"crossover-dot\" data-pair=\"{}\" cx=\"{:.1}\" cy=\"{:.1}\" r=\"4\" fill=\"#000\"><title>{} crossover at {}: {} rose above</title></circle>",
            event.pair,
            slots.center(i),
            y_for(mid, max),
            event.pair,
            esc(tag),
            event.rising
        );
    }
    release_labels(out, report, &slots);
    out.push_str("</svg>\n</section>\n");
}
