use std::collections::BTreeMap;
use std::fmt::Write;

use super::{BlockSchedule, ScheduleResult, Slot};
use crate::ir::IrModule;

/// Text Gantt chart: one row per instruction, one column per cycle.
pub fn render_gantt(m: &IrModule, s: &ScheduleResult) -> String {
    let mut out = String::new();
    for b in &s.blocks {
        if b.slots.is_empty() {
            continue;
        }
        let f = m.function(&b.function);
        let label = |slot: &Slot| {
            let inst = f.and_then(|f| f.block(&b.block)).and_then(|blk| blk.insts.get(slot.inst));
            let op = inst.map(|i| format!("{:?}", i.opcode()).to_lowercase()).unwrap_or_default();
            match inst.and_then(|i| i.result.as_deref()) {
                Some(r) => format!("%{r} = {op}"),
                None => op,
            }
        };
        let rows: Vec<(String, &Slot)> = b.slots.iter().map(|x| (label(x), x)).collect();
        let width = rows.iter().map(|(l, x)| l.len() + x.bank.as_ref().map_or(0, |b| b.len() + 3)).max().unwrap_or(0);
        let _ = writeln!(out, "@{} %{} latency={}", b.function, b.block, b.latency);
        let axis: String = (0..b.latency).map(|c| char::from(b'0' + (c % 10) as u8)).collect();
        let _ = writeln!(out, "  {:width$} |{axis}|", "");
        for (l, x) in rows {
            let name = match &x.bank {
                Some(bank) => format!("{l} [{bank}]"),
                None => l,
            };
            let bar: String = (0..b.latency)
                .map(|c| if c >= x.start && c < x.start + x.lat.max(1) { '#' } else { '.' })
                .collect();
            let _ = writeln!(out, "  {name:width$} |{bar}|");
        }
    }
    out
}

/// Machine-readable report, one `sched` line per instruction.
pub fn render_report(s: &ScheduleResult) -> String {
    let mut out = String::new();
    for b in &s.blocks {
        for x in &b.slots {
            let _ = writeln!(
                out,
                "sched fn={} block={} inst={} start={} lat={} bank={}",
                b.function,
                b.block,
                x.inst,
                x.start,
                x.lat,
                x.bank.as_deref().unwrap_or("-")
            );
        }
    }
    if let Some(t) = s.total_cycles {
        let _ = writeln!(out, "cycles total={t}");
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportLine {
    pub function: String,
    pub block: String,
    pub slot: Slot,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScheduleReport {
    pub lines: Vec<ReportLine>,
    pub total: Option<u64>,
}

impl ScheduleReport {
    /// Regroups the lines into block schedules; latencies are recomputed
    /// from the slots.
    pub fn to_schedule(&self) -> ScheduleResult {
        let mut order: Vec<(String, String)> = Vec::new();
        let mut by_block: BTreeMap<(String, String), Vec<Slot>> = BTreeMap::new();
        for l in &self.lines {
            let key = (l.function.clone(), l.block.clone());
            if !by_block.contains_key(&key) {
                order.push(key.clone());
            }
            by_block.entry(key).or_default().push(l.slot.clone());
        }
        let blocks = order
            .into_iter()
            .map(|key| {
                let slots = by_block.remove(&key).unwrap_or_default();
                let latency = slots.iter().map(|x| x.start + x.lat.max(1)).max().unwrap_or(0);
                BlockSchedule { function: key.0, block: key.1, slots, latency }
            })
            .collect();
        ScheduleResult { blocks, total_cycles: self.total }
    }
}

fn fields(line: &str) -> Result<BTreeMap<&str, &str>, String> {
    line.split_whitespace()
        .skip(1)
        .map(|kv| kv.split_once('=').ok_or_else(|| format!("malformed field `{kv}`")))
        .collect()
}

/// Parses the output of [`render_report`]. Other lines are ignored.
pub fn parse_report(text: &str) -> Result<ScheduleReport, String> {
    let mut out = ScheduleReport::default();
    for (n, line) in text.lines().enumerate() {
        let ctx = |e: String| format!("line {}: {e}", n + 1);
        let num = |f: &BTreeMap<&str, &str>, k: &str| -> Result<u64, String> {
            f.get(k).ok_or_else(|| format!("missing `{k}`"))?.parse().map_err(|_| format!("`{k}` is not a number"))
        };
        if line.starts_with("sched ") {
            let f = fields(line).map_err(ctx)?;
            let get = |k: &str| f.get(k).map(|s| s.to_string()).ok_or_else(|| format!("missing `{k}`"));
            let bank = get("bank").map_err(ctx)?;
            out.lines.push(ReportLine {
                function: get("fn").map_err(ctx)?,
                block: get("block").map_err(ctx)?,
                slot: Slot {
                    inst: num(&f, "inst").map_err(ctx)? as usize,
                    start: num(&f, "start").map_err(ctx)? as u32,
                    lat: num(&f, "lat").map_err(ctx)? as u32,
                    bank: (bank != "-").then_some(bank),
                },
            });
        } else if line.starts_with("cycles ") {
            let f = fields(line).map_err(ctx)?;
            out.total = Some(num(&f, "total").map_err(ctx)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_module;
    use crate::sched::{build_dfg, check_schedule, schedule_module, ResourceModel};

    const SRC: &str = "@a = global [2 x float] zeroinitializer
define void @main() {
entry:
  %p = getelementptr inbounds [2 x float]* @a, i64 0, i64 1
  %v = load float* %p
  ret void
}
";

    #[test]
    fn report_round_trips_and_revalidates() {
        let m = parse_module(SRC).unwrap().module;
        let r = ResourceModel::default();
        let mut s = schedule_module(&m, &r);
        s.total_cycles = Some(2);
        let text = render_report(&s);
        assert!(text.contains("sched fn=main block=entry inst=1 start=0 lat=2 bank=a"));
        let back = parse_report(&text).unwrap().to_schedule();
        assert_eq!(back, s);
        let g = build_dfg(&m, &m.functions[0], 0, &r);
        assert!(check_schedule(&g, &back.blocks[0], &r).is_ok());
    }

    #[test]
    fn gantt_has_a_row_per_instruction() {
        let m = parse_module(SRC).unwrap().module;
        let s = schedule_module(&m, &ResourceModel::default());
        let g = render_gantt(&m, &s);
        assert!(g.contains("%v = load [a] |##|"), "{g}");
        assert_eq!(g.lines().filter(|l| l.contains('#')).count(), 2);
    }
}
