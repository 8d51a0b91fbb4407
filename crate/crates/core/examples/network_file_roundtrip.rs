//! Write a network file, read it back, certify it and round-trip the report.

use netiqc::kyp::{certify_network, Method};
use netiqc::netfile::{gen_example, parse_network_str, ReportFile, Topology};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let file = gen_example(Topology::Star, 5, &[1.0], &[1.0, 25.0], -1.0, 0.1)?;
    let text = file.to_json();
    println!("{text}");

    let net = parse_network_str(&text)?;
    let report = certify_network(&net.graph, &net.agents, &net.multiplier, &[Method::Monolithic, Method::Linkwise], &net.options)?;
    let rf = ReportFile::new(report, None, 0.0);
    let json = rf.to_json();
    let back = ReportFile::from_json(&json)?;
    println!("report round-trips: {}", back == rf);
    for m in &back.methods {
        println!("{}: {:?}", m.method, m.overall);
    }

    // a broken file reports the offending field
    let bad = text.replacen("\"den\": [\n          1.0,\n          25.0", "\"den\": [\n          1.0,\n          -25.0", 1);
    if let Err(e) = parse_network_str(&bad) {
        println!("rejected: {e}");
    }
    Ok(())
}
