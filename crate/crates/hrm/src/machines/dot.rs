//! Graphviz rendering of hierarchies.

use std::fmt::Write;

use super::Hrm;

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// One `digraph` per machine, edges labeled `callee | formula`.
///
/// Accepting states are double circles and rejecting states are boxes. The
/// leaf machine is not rendered.
pub fn to_dot(hrm: &Hrm) -> String {
    let mut out = String::new();
    for m in hrm.machines() {
        let _ = writeln!(out, "digraph {} {{", quote(m.name()));
        let _ = writeln!(out, "  rankdir=LR;");
        let _ = writeln!(out, "  __start [shape=point];");
        for (u, name) in m.states().iter().enumerate() {
            let shape = if m.is_accepting(u) {
                "doublecircle"
            } else if m.is_rejecting(u) {
                "box"
            } else {
                "circle"
            };
            let _ = writeln!(out, "  {} [shape={shape}];", quote(name));
        }
        let _ = writeln!(out, "  __start -> {};", quote(m.state_name(m.initial())));
        for e in m.edges() {
            let label = format!("{} | {}", hrm.callee_name(e.callee), e.context.display(hrm.props()));
            let _ = writeln!(
                out,
                "  {} -> {} [label={}];",
                quote(m.state_name(e.from)),
                quote(m.state_name(e.to)),
                quote(&label)
            );
        }
        let _ = writeln!(out, "}}");
    }
    out
}
