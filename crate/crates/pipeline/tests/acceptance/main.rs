//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any
//! failure.

mod gen;
mod geometry;
mod oracle;
mod robot;
mod scene;
mod visual;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

pub type Outcome = anyhow::Result<String>;

/// Fails the criterion when `took` exceeds `limit`.
pub fn within(took: Duration, limit: Duration) -> anyhow::Result<()> {
    anyhow::ensure!(took < limit, "took {:.1?}, limit {:.0?}", took, limit);
    Ok(())
}

fn main() {
    let suites: [(&str, fn() -> Outcome); 11] = [
        ("transform algebra", geometry::transforms),
        ("registration", geometry::registration),
        ("projection invariance", geometry::projection),
        ("renderer oracle", visual::renderer),
        ("compositing", visual::compositing),
        ("kinematics", robot::kinematics),
        ("planning", robot::planning),
        ("calibration", geometry::calibration),
        ("coincidence", scene::coincidence),
        ("pipeline end-to-end", scene::end_to_end),
        ("i/o round-trips", scene::io),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, suite) in suites {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let t0 = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(suite)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(anyhow::anyhow!("panicked: {msg}"))
        });
        let took = t0.elapsed();
        match result {
            Ok(detail) => println!("PASS  {name}: {detail} [{took:.2?}]"),
            Err(e) => {
                failed += 1;
                println!("FAIL  {name}: {e:#} [{took:.2?}]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
