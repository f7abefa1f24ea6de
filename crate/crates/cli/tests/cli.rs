use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::sync::Arc;
use std::time::{Duration, Instant};

use zoea_core::compile::{check_events, CompileEvent, Pipeline};
use zoea_core::graph::{Document, Shape};
use zoea_core::synth::SearchConfig;
use zoea_core::value::Value;
use zoea_service::Store;

const LISTING: &str = include_str!("fixtures/is_week_day.zoea");

fn zoea(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zoea"))
        .args(args)
        .env_remove("ZOEA_STORE")
        .env_remove("ZOEA_LISTEN")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn compile_listing(dir: &Path) -> PathBuf {
    let src = write(dir, "is_week_day.zoea", LISTING);
    let out = dir.join("is_week_day.pipeline.json");
    let o = zoea(&["compile", s(&src), "--emit-pipeline", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    out
}

#[test]
fn compile_listing_prints_progress_and_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let src = write(dir.path(), "w.zoea", LISTING);
    let o = zoea(&["compile", s(&src)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("pending"), "{text}");
    assert!(text.contains("solved"), "{text}");
    assert!(text.trim_end().ends_with("result: success"), "{text}");

    let o = zoea(&["compile", s(&src), "--json"]);
    let events: Vec<CompileEvent> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    check_events(&events).unwrap();
}

#[test]
fn exit_codes_follow_the_failure_kind() {
    let dir = tempfile::tempdir().unwrap();
    let bad_tag = write(dir.path(), "t.zoea", "program: p\ncase: 1 input: 1\n      outptu: 2\n");
    let o = zoea(&["compile", s(&bad_tag)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    let dup = write(dir.path(), "d.zoea", "program: p\ncase: 1 input: 1 output: 2\ncase: 1 input: 2 output: 3\n");
    let o = zoea(&["compile", s(&dup)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("duplicate-case-id"), "{}", stderr(&o));

    let contradiction = write(dir.path(), "c.zoea", "program: p\ncase: 1 input: 1 output: 2\ncase: 2 input: 1 output: 3\n");
    let o = zoea(&["compile", s(&contradiction)]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stdout(&o).contains("result: failure"));

    let o = zoea(&["compile", s(&dir.path().join("missing.zoea"))]);
    assert_eq!(o.status.code(), Some(1));
    let o = zoea(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn run_prints_outputs_and_honours_data_bindings() {
    let dir = tempfile::tempdir().unwrap();
    let pipeline = compile_listing(dir.path());
    let o = zoea(&["run", s(&pipeline), "--input", r#""banana""#]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), r#"["unrecognised"]"#);
    let o = zoea(&["run", s(&pipeline), "--input", r#""thursday""#]);
    assert_eq!(stdout(&o).trim(), r#"["weekday"]"#);

    let o = zoea(&["run", s(&pipeline)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("takes 1 inputs"), "{}", stderr(&o));
    let o = zoea(&["run", s(&pipeline), "--input", "{oops"]);
    assert_eq!(o.status.code(), Some(2));

    let p: Pipeline = serde_json::from_str(&std::fs::read_to_string(&pipeline).unwrap()).unwrap();
    let data_id = *p.data.keys().next().unwrap();
    let fruit = write(dir.path(), "fruit.json", r#"["banana", "apple"]"#);
    let binding = format!("{}={}", data_id.0, s(&fruit));
    let o = zoea(&["run", s(&pipeline), "--input", r#""Banana""#, "--data", &binding]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), r#"["weekday"]"#);
    let o = zoea(&["run", s(&pipeline), "--input", r#""monday""#, "--data", &binding]);
    assert_eq!(stdout(&o).trim(), r#"["unrecognised"]"#);
    let o = zoea(&["run", s(&pipeline), "--input", r#""x""#, "--data", "999=x.json"]);
    assert_eq!(o.status.code(), Some(2));
}

fn week_day_document() -> Document {
    let mut d = Document::new("is_week_day");
    let days = Value::list(
        ["monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"].map(Value::text),
    );
    let data = d.add_element("1", 0, Shape::List, days.clone()).unwrap();
    let input = d.add_element("1", 1, Shape::Scalar, Value::text("thursday")).unwrap();
    let output = d.add_element("1", 2, Shape::Scalar, Value::text("weekday")).unwrap();
    d.add_dependency("1", [data, input], output).unwrap();
    for (i, o) in [("MONDAY", "weekday"), ("banana", "unrecognised"), ("", "unrecognised")] {
        let c = d.clone_case("1").unwrap();
        let k = d.case_index(&c).unwrap();
        let ids: Vec<_> = d.cases[k].elements().map(|e| e.id).collect();
        d.set_value(ids[0], days.clone()).unwrap();
        d.set_value(ids[1], Value::text(i)).unwrap();
        d.set_value(ids[2], Value::text(o)).unwrap();
    }
    d
}

#[test]
fn export_and_validate_documents() {
    let dir = tempfile::tempdir().unwrap();
    let doc = write(dir.path(), "w.json", &week_day_document().to_json());
    let o = zoea(&["export", s(&doc)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with("program: is_week_day"), "{text}");
    let exported = write(dir.path(), "exported.zoea", &text);
    assert_eq!(zoea(&["validate", s(&exported)]).status.code(), Some(0));

    let o = zoea(&["validate", s(&doc)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("is_week_day: ok"));
    let empty = write(dir.path(), "e.json", &Document::new("e").to_json());
    let o = zoea(&["validate", s(&empty), "--json"]);
    assert_eq!(o.status.code(), Some(2));
    let diags: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert!(!diags.as_array().unwrap().is_empty());
    assert_eq!(zoea(&["export", s(&empty)]).status.code(), Some(2));
}

#[test]
fn cli_and_service_compile_the_same_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = week_day_document();
    let doc = write(dir.path(), "w.json", &d.to_json());
    let out = dir.path().join("p.json");
    let o = zoea(&["compile", s(&doc), "--emit-pipeline", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let from_cli: Pipeline = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();

    let (store, _) = Store::open(dir.path().join("store")).unwrap();
    let store = Arc::new(store);
    store.create(d).unwrap();
    let compiled = zoea_service::workspace::compile(&store, "is_week_day", &SearchConfig::default(), &mut |_| {})
        .unwrap();
    assert_eq!(compiled.pipeline, from_cli);
}

#[test]
fn compile_imports_from_the_store() {
    let dir = tempfile::tempdir().unwrap();
    let store_dir = dir.path().join("store");
    {
        let (store, _) = Store::open(&store_dir).unwrap();
        let store = Arc::new(store);
        let mut inc = Document::new("inc");
        inc.add_element("1", 1, Shape::Scalar, Value::int(1)).unwrap();
        inc.add_element("1", 2, Shape::Scalar, Value::int(2)).unwrap();
        let c = inc.clone_case("1").unwrap();
        let k = inc.case_index(&c).unwrap();
        let ids: Vec<_> = inc.cases[k].elements().map(|e| e.id).collect();
        inc.set_value(ids[0], Value::int(8)).unwrap();
        inc.set_value(ids[1], Value::int(9)).unwrap();
        store.create(inc).unwrap();
        zoea_service::workspace::compile(&store, "inc", &SearchConfig::default(), &mut |_| {}).unwrap();
    }
    let src = write(
        dir.path(),
        "p.zoea",
        "program: add_two\nuse: inc\ncase: 1 input: 1 output: 3\ncase: 2 input: 10 output: 12\n",
    );
    let o = zoea(&["compile", s(&src)]);
    assert_eq!(o.status.code(), Some(2), "without the store `inc` is unknown");
    let out = dir.path().join("p.json");
    let o = zoea(&["compile", s(&src), "--store", s(&store_dir), "--emit-pipeline", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = zoea(&["run", s(&out), "--input", "40", "--store", s(&store_dir)]);
    assert_eq!(stdout(&o).trim(), "[42]", "{}", stderr(&o));
}

#[test]
fn bench_writes_csv_and_table() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("bench.csv");
    let o = zoea(&["bench", "--repeat", "1", "--csv", s(&csv_path)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("summary"));
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 12);
    assert!(lines[0].starts_with("problem,with_candidates"));
    assert!(lines[11].starts_with("summary,"));
    for row in &lines[1..11] {
        let cells: Vec<&str> = row.split(',').collect();
        let with: u64 = cells[1].parse().unwrap();
        let without: u64 = cells[3].parse().unwrap();
        assert!(with <= without, "{row}");
        assert_eq!(cells[5], "ok");
    }
}

#[test]
fn bench_on_a_suite_directory_with_nothing_to_prune() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("suite");
    std::fs::create_dir(&suite).unwrap();
    let mut d = Document::new("single");
    let i = d.add_element("1", 1, Shape::Scalar, Value::int(2)).unwrap();
    let o = d.add_element("1", 2, Shape::Scalar, Value::int(4)).unwrap();
    d.add_dependency("1", [i], o).unwrap();
    write(&suite, "single.json", &d.to_json());
    let o = zoea(&["bench", s(&suite), "--repeat", "1", "--json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let row: Vec<String> = stdout(&o).lines().nth(1).unwrap().split(',').map(String::from).collect();
    assert_eq!(row[0], "single");
    assert_eq!(row[1], row[3], "one input: both modes see the same sources");

    let saved = dir.path().join("saved");
    assert_eq!(zoea(&["bench", "--save-suite", s(&saved)]).status.code(), Some(0));
    assert_eq!(std::fs::read_dir(&saved).unwrap().count(), 10);
}

#[test]
fn serve_answers_http() {
    let dir = tempfile::tempdir().unwrap();
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let addr = format!("127.0.0.1:{port}");
    let mut child = Command::new(env!("CARGO_BIN_EXE_zoea"))
        .args(["serve", "--listen", &addr, "--store", s(dir.path())])
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let started = Instant::now();
    let response = loop {
        match TcpStream::connect(&addr) {
            Ok(mut stream) => {
                write!(stream, "GET /programs HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n").unwrap();
                let mut text = String::new();
                stream.read_to_string(&mut text).unwrap();
                break text;
            }
            Err(_) if started.elapsed() < Duration::from_secs(20) => std::thread::sleep(Duration::from_millis(50)),
            Err(e) => panic!("server did not start: {e}"),
        }
    };
    child.kill().unwrap();
    child.wait().unwrap();
    assert!(response.starts_with("HTTP/1.1 200"), "{response}");
    assert!(response.trim_end().ends_with("[]"), "{response}");
}
