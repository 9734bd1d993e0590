use sgs_admm::instances::{InstancePreset, PRESET_NAMES};
use sgs_admm::problem_file::{parse, to_string};
use sgs_admm::Error;

#[test]
fn presets_round_trip_exactly() {
    for name in PRESET_NAMES {
        let spec = InstancePreset::by_name(name).unwrap().generate().unwrap();
        let text = to_string(&spec);
        let back = parse(&text).unwrap();
        assert_eq!(back, spec, "{name}");
        assert_eq!(to_string(&back), text);
    }
}

#[test]
fn floats_use_seventeen_digits() {
    let spec = InstancePreset::by_name("threeby2").unwrap().generate().unwrap();
    let text = to_string(&spec);
    let line = text.lines().find(|l| l.starts_with("c: ")).unwrap();
    let first = line.trim_start_matches("c: [").split(',').next().unwrap();
    let mantissa = first.split('e').next().unwrap().trim_start_matches('-');
    assert_eq!(mantissa.chars().filter(|c| c.is_ascii_digit()).count(), 17, "{first}");
}

fn tiny_text() -> String {
    to_string(&InstancePreset::Tiny.generate().unwrap())
}

fn parse_error(text: &str) -> (usize, String) {
    match parse(text).unwrap_err() {
        Error::Parse { line, field, .. } => (line, field),
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn comments_and_blank_lines_are_ignored() {
    let text = format!("# header\n\n{}", tiny_text());
    assert_eq!(parse(&text).unwrap(), InstancePreset::Tiny.generate().unwrap());
}

#[test]
fn bad_number_names_line_and_field() {
    let text = tiny_text().replace("c: [1.0000000000000000e0]", "c: [one]");
    let line = text.lines().position(|l| l.starts_with("c:")).unwrap() + 1;
    assert_eq!(parse_error(&text), (line, "c".to_string()));
}

#[test]
fn wrong_length_missing_duplicate_unknown() {
    let text = tiny_text().replace("A: [1.0000000000000000e0]", "A: [1.0, 2.0]");
    assert_eq!(parse_error(&text), (4, "A".to_string()));

    let text: String = tiny_text().lines().filter(|l| !l.starts_with("f.l")).map(|l| format!("{l}\n")).collect();
    assert_eq!(parse_error(&text).1, "f.l");

    let text = format!("{}z_dim: 1\n", tiny_text());
    let n = text.lines().count();
    assert_eq!(parse_error(&text), (n, "z_dim".to_string()));

    let text = format!("colour: blue\n{}", tiny_text());
    assert_eq!(parse_error(&text), (1, "colour".to_string()));

    let text = tiny_text().replace("p1.kind: zero", "p1.kind: huber");
    assert_eq!(parse_error(&text).1, "p1.kind");

    let err = parse("x_blocks [1]\n").unwrap_err().to_string();
    assert!(err.contains("line 1"), "{err}");
}

#[test]
fn inconsistent_content_is_rejected() {
    let text = tiny_text().replace("f.Q: [1.0000000000000000e0]", "f.Q: [-1.0000000000000000e0]");
    assert_eq!(parse_error(&text).1, "f.Q");
    let text = tiny_text().replace("x_blocks: [1]", "x_blocks: [0]");
    assert_eq!(parse_error(&text), (1, "x_blocks".to_string()));
}
