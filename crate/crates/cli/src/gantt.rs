//! ASCII and SVG Gantt charts, one lane per robot.

use std::fmt::Write as _;

use robosched::model::{Schedule, ScheduleEntry};

const LABEL_W: f64 = 80.0;
const CHART_W: f64 = 720.0;
const LANE_H: f64 = 28.0;
const TOP: f64 = 12.0;
const AXIS_H: f64 = 30.0;

/// Lane order: `robots` first, then any robot that only appears in the
/// entries, sorted.
pub fn lanes(schedule: &Schedule, robots: &[String]) -> Vec<String> {
    let mut out: Vec<String> = robots.to_vec();
    let mut extra: Vec<String> = schedule
        .entries
        .iter()
        .map(|e| e.robot_id.clone())
        .filter(|r| !robots.contains(r))
        .collect();
    extra.sort();
    extra.dedup();
    out.extend(extra);
    out
}

fn horizon(schedule: &Schedule) -> f64 {
    schedule.entries.iter().map(|e| e.end).fold(0.0, f64::max)
}

fn sorted_entries<'a>(schedule: &'a Schedule, robot: &'a str) -> Vec<&'a ScheduleEntry> {
    let mut v: Vec<&ScheduleEntry> = schedule.robot_entries(robot).collect();
    v.sort_by(|a, b| a.start.total_cmp(&b.start).then_with(|| a.task_id.cmp(&b.task_id)));
    v
}

/// Shortest decimal form, at most three places.
fn num(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Rows of `width` columns; each task is drawn as `[id---]` over the
/// columns its interval covers.
pub fn render_ascii(schedule: &Schedule, robots: &[String], width: usize) -> String {
    let width = width.max(10);
    let lanes = lanes(schedule, robots);
    let name_w = lanes.iter().map(String::len).max().unwrap_or(0).max(5);
    let end = horizon(schedule);
    let scale = if end > 0.0 { width as f64 / end } else { 0.0 };
    let col = |t: f64| ((t * scale).round() as usize).min(width);
    let mut out = String::new();
    for robot in &lanes {
        let mut row = vec![' '; width];
        for e in sorted_entries(schedule, robot) {
            let (a, b) = (col(e.start), col(e.end).max(col(e.start) + 1).min(width));
            if a >= width {
                continue;
            }
            let span = b - a;
            let mut cells: Vec<char> = if span == 1 {
                vec!['#']
            } else {
                let mut c = vec!['-'; span];
                c[0] = '[';
                c[span - 1] = ']';
                for (k, ch) in e.task_id.chars().take(span.saturating_sub(2)).enumerate() {
                    c[k + 1] = ch;
                }
                c
            };
            row[a..b].swap_with_slice(&mut cells);
        }
        let _ = writeln!(out, "{robot:<name_w$} |{}|", row.into_iter().collect::<String>());
    }
    let right = num(end);
    let gap = (width + 1).saturating_sub(right.len());
    let _ = writeln!(out, "{:<name_w$} 0{}{right}", "", " ".repeat(gap.saturating_sub(1)));
    out
}

fn tick_step(end: f64) -> f64 {
    if end <= 0.0 {
        return 1.0;
    }
    let raw = end / 8.0;
    let mag = 10f64.powf(raw.log10().floor());
    [1.0, 2.0, 5.0, 10.0].into_iter().map(|k| k * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag)
}

/// One lane per robot, a rectangle per entry at `(start, end)` with its
/// task id, and a time axis with ticks.
pub fn render_svg(schedule: &Schedule, robots: &[String]) -> String {
    let lanes = lanes(schedule, robots);
    let end = horizon(schedule);
    let span = if end > 0.0 { end } else { 1.0 };
    let scale = CHART_W / span;
    let x = |t: f64| LABEL_W + t * scale;
    let axis_y = TOP + LANE_H * lanes.len() as f64;
    let width = LABEL_W + CHART_W + 20.0;
    let height = axis_y + AXIS_H;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}" font-family="monospace" font-size="11">"#,
        num(width),
        num(height),
        num(width),
        num(height)
    );
    for (k, robot) in lanes.iter().enumerate() {
        let y = TOP + LANE_H * k as f64;
        let _ = writeln!(s, r#"<g class="lane" data-robot="{}">"#, escape(robot));
        let _ = writeln!(
            s,
            r#"<text x="4" y="{}" dominant-baseline="middle">{}</text>"#,
            num(y + LANE_H / 2.0),
            escape(robot)
        );
        for e in sorted_entries(schedule, robot) {
            let (x0, w) = (x(e.start), (e.end - e.start) * scale);
            let _ = writeln!(
                s,
                r##"<rect x="{}" y="{}" width="{}" height="{}" fill="#9ecae1" stroke="#3182bd" data-task="{}"/>"##,
                num(x0),
                num(y + 3.0),
                num(w.max(0.0)),
                num(LANE_H - 6.0),
                escape(&e.task_id)
            );
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" text-anchor="middle" dominant-baseline="middle">{}</text>"#,
                num(x0 + w / 2.0),
                num(y + LANE_H / 2.0),
                escape(&e.task_id)
            );
        }
        s.push_str("</g>\n");
    }
    let _ = writeln!(s, r#"<g class="axis">"#);
    let _ = writeln!(
        s,
        r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        num(LABEL_W),
        num(axis_y),
        num(LABEL_W + CHART_W),
        num(axis_y)
    );
    let step = tick_step(end);
    let mut k = 0u32;
    loop {
        let t = step * f64::from(k);
        if t > span + 1e-9 {
            break;
        }
        let _ = writeln!(
            s,
            r#"<line x1="{0}" y1="{1}" x2="{0}" y2="{2}" stroke="black"/><text x="{0}" y="{3}" text-anchor="middle">{4}</text>"#,
            num(x(t)),
            num(axis_y),
            num(axis_y + 4.0),
            num(axis_y + 16.0),
            num(t)
        );
        k += 1;
    }
    s.push_str("</g>\n</svg>\n");
    s
}
