use ptcm_cli::{config_from_output, execute, run, RunConfig};

fn parse(args: &[&str]) -> RunConfig {
    RunConfig::parse_from(std::iter::once("ptcm").chain(args.iter().copied()))
        .unwrap()
        .0
}

// Data lines after the optional column-name line.
fn data_rows(text: &str) -> Vec<Vec<String>> {
    let mut lines: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    if lines.first().is_some_and(|l| l.split(',').all(|f| f.parse::<f64>().is_err())) {
        lines.remove(0);
    }
    lines.iter().map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn ber_sweep_has_one_row_per_grid_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ber.csv");
    let code = run([
        "ptcm", "ber", "--gen", "26,37", "--punct", "1 0;1 1", "--M", "4", "--ebn0", "6:0.5:12", "--bits", "100000",
        "--seed", "7", "-o",
    ]
    .into_iter()
    .map(String::from)
    .chain([out.to_string_lossy().into_owned()]));
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.lines().any(|l| l == "ebn0_db,rate,info_bits,bit_errors,ber"));
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 13);
    assert_eq!(rows[0][0], "6");
    assert_eq!(rows[12][0], "12");
    for r in &rows {
        assert_eq!(r[1], "4/3");
        assert!(r[2].parse::<u64>().unwrap() >= 100_000);
    }
}

#[test]
fn capacity_curve_is_monotone_and_saturates() {
    let text = execute(&parse(&["capacity", "--constellation", "4ask", "--ebn0", "-2:1:25"])).unwrap();
    let values: Vec<f64> = data_rows(&text).iter().map(|r| r[1].parse().unwrap()).collect();
    assert_eq!(values.len(), 28);
    assert!(values.windows(2).all(|w| w[1] >= w[0]));
    assert!((values.last().unwrap() - 2.0).abs() < 0.01);
}

#[test]
fn header_alone_reproduces_the_run() {
    let first = execute(&parse(&["ber", "--ebn0", "5:1:6", "--bits", "5000", "--seed", "11"])).unwrap();
    let config = config_from_output(&first).unwrap();
    assert_eq!(execute(&config).unwrap(), first);

    let search = execute(&parse(&["search", "--nu", "1", "--ebn0", "6:2:8", "--bits", "2000"])).unwrap();
    assert_eq!(execute(&config_from_output(&search).unwrap()).unwrap(), search);
}

#[test]
fn encode_then_decode_golden_frame() {
    let dir = tempfile::tempdir().unwrap();
    let frame = dir.path().join("frame.csv");
    let config = parse(&["encode", "--M", "8", "--info", "10110010", "--uncoded", "110100"]);
    std::fs::write(&frame, execute(&config).unwrap()).unwrap();
    let decoded = execute(&parse(&["decode", "--M", "8", "--input", frame.to_str().unwrap()])).unwrap();
    let rows = data_rows(&decoded);
    assert_eq!(rows[0], vec!["info", "10110010"]);
    assert_eq!(rows[1], vec!["uncoded", "110100"]);
}

#[test]
fn impulse_golden_vector() {
    // (5,7) mother code, no puncturing: impulse output pairs 11,01,11, then
    // the zero tail.
    let text = execute(&parse(&["encode", "--gen", "5,7", "--punct", "1;1", "--info", "1000"])).unwrap();
    let labels: Vec<String> = data_rows(&text).iter().map(|r| r[1].clone()).collect();
    assert_eq!(labels, vec!["3", "1", "3", "0", "0", "0"]);
}

#[test]
fn qam_frames_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let frame = dir.path().join("frame.csv");
    let enc = execute(&parse(&["encode", "--qam", "--info", "1101"])).unwrap();
    let levels: Vec<String> = data_rows(&enc).iter().map(|r| r[2].clone()).collect();
    assert_eq!(levels.len() % 2, 0);
    let pairs: String = levels.chunks(2).map(|p| format!("{},{}\n", p[0], p[1])).collect();
    std::fs::write(&frame, pairs).unwrap();
    let dec = execute(&parse(&["decode", "--qam", "--input", frame.to_str().unwrap()])).unwrap();
    assert_eq!(data_rows(&dec)[0], vec!["info", "1101"]);
}

#[test]
fn validation_failures_exit_nonzero() {
    assert_eq!(run(["ptcm", "ber", "--gen", "9,3"]), 1);
    assert_eq!(run(["ptcm", "ber", "--punct", "1 0;1 0"]), 1);
    assert_eq!(run(["ptcm", "encode", "--info", "101"]), 1);
    assert_eq!(run(["ptcm", "frobnicate"]), 2);
    assert_eq!(run(["ptcm", "ber", "--unknown-flag"]), 2);
    assert_eq!(run(["ptcm", "capacity", "--constellation", "5psk"]), 1);
}

#[test]
fn efficiency_rows() {
    let text = execute(&parse(&[
        "efficiency", "--spec", "5,7/1 0;1 1/4", "--ebn0", "4:1:14", "--bits", "20000", "--target", "1e-2",
    ]))
    .unwrap();
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 1);
    let db: f64 = rows[0][0].parse().unwrap();
    assert!((4.0..14.0).contains(&db));
    assert_eq!(rows[0][2], "4/3");
}

#[test]
fn worker_count_does_not_change_results() {
    let config = parse(&["ber", "--ebn0", "5:1:6", "--bits", "20000"]);
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    assert_eq!(one.install(|| execute(&config).unwrap()), three.install(|| execute(&config).unwrap()));
}
