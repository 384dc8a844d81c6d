//! Loads a trajectory CSV with custom column names, reports the events that
//! were rejected and applies the duration and stoppage filter.

use ensemble_follower::data::{filter_events, read_events, ColumnMapping, FilterConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut text = String::from("trip,time,lead_v,follow_v,gap\n");
    for k in 0..500 {
        let t = k as f64 * 0.04;
        text += &format!("a,{t:.2},20.0,{:.3},{:.3}\n", 19.0 + 0.02 * k as f64 / 25.0, 30.0 - 0.01 * k as f64);
    }
    // a trip with a negative speed sample is dropped, the rest still loads
    for k in 0..4 {
        let v = if k == 2 { -0.5 } else { 15.0 };
        text += &format!("b,{:.2},15.0,{v},{}\n", k as f64 * 0.04, 20 + k);
    }
    // a short trip that loads fine but fails the duration filter
    for k in 0..50 {
        text += &format!("c,{:.2},10.0,10.0,15.0\n", k as f64 * 0.04);
    }
    let mapping = ColumnMapping {
        event_id: "trip".into(),
        t: "time".into(),
        lv_speed: "lead_v".into(),
        fv_speed: "follow_v".into(),
        spacing: "gap".into(),
    };
    let out = read_events(text.as_bytes(), &mapping)?;
    // irregular sampling is structural: the whole file is refused
    let irregular = "trip,time,lead_v,follow_v,gap\nd,0,15,15,20\nd,0.04,15,15,20\nd,0.12,15,15,20\n";
    if let Err(e) = read_events(irregular.as_bytes(), &mapping) {
        println!("irregular file refused: {e}");
    }
    for r in &out.rejected {
        println!("rejected {} at line {}: {}", r.event_id, r.line, r.reason);
    }
    let loaded: Vec<String> = out.events.iter().map(|e| format!("{} ({:.1} s)", e.event_id, e.duration())).collect();
    println!("loaded: {}", loaded.join(", "));
    let kept = filter_events(out.events, &FilterConfig::default());
    println!("after filtering: {:?}", kept.iter().map(|e| &e.event_id).collect::<Vec<_>>());
    Ok(())
}
