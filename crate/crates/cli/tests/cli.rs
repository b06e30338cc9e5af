use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use maskopt::{load_pbm, load_pnm, save_pnm, Image};
use tempfile::TempDir;

fn testdata(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../testdata")
        .join(name)
}

fn maskopt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_maskopt"))
        .args(args)
        .env_remove("MASKOPT_WORKERS")
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn error_line(out: &Output) -> serde_json::Value {
    let stderr = String::from_utf8(out.stderr.clone()).unwrap();
    let line = stderr.lines().last().expect("an error line on stderr");
    serde_json::from_str(line).unwrap()
}

fn write_image(dir: &TempDir, name: &str, img: &Image) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, save_pnm(img)).unwrap();
    path.to_str().unwrap().to_owned()
}

fn small_image(dir: &TempDir) -> String {
    let f = Image::from_fn(40, 32, |x, y| {
        ((x as f64 / 5.0).sin() * (y as f64 / 4.0).cos() + 1.0) / 2.0
    })
    .unwrap();
    write_image(dir, "small.pgm", &f)
}

fn path_str(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_owned()
}

#[test]
fn mask_eval_and_inpaint_round_trip() {
    let dir = TempDir::new().unwrap();
    let image = small_image(&dir);
    let mask = path_str(&dir, "m.pbm");
    for method in ["aa", "ps", "ps-nlpe", "c2f"] {
        let out = maskopt(&[
            "mask",
            "--image",
            &image,
            "--method",
            method,
            "--density",
            "0.1",
            "--seed",
            "3",
            "--patch-size",
            "16",
            "--nlpe-cycles",
            "1",
            "--removal-fraction",
            "0.05",
            "--output",
            &mask,
        ]);
        assert!(
            out.status.success(),
            "{method}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let m = load_pbm(&std::fs::read(&mask).unwrap()).unwrap();
        assert_eq!((m.width(), m.height()), (40, 32));
        if method != "aa" {
            assert!(m.count() >= 128, "{method}: {}", m.count());
        }
    }

    let out = maskopt(&["eval", "--image", &image, "--mask", &mask]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("mse,psnr,density,cg_iters"));
    let fields: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(fields.len(), 4);
    let psnr: f64 = fields[1].parse().unwrap();
    assert!(psnr > 15.0);

    let restored = path_str(&dir, "u.pgm");
    let out = maskopt(&[
        "inpaint", "--image", &image, "--mask", &mask, "--output", &restored,
    ]);
    assert!(out.status.success());
    let u = load_pnm(&std::fs::read(&restored).unwrap()).unwrap();
    assert_eq!((u.width(), u.height(), u.channels()), (40, 32, 1));
}

#[test]
fn plan_csv_matches_requested_density() {
    let dir = TempDir::new().unwrap();
    let image = small_image(&dir);
    let out = maskopt(&[
        "plan",
        "--image",
        &image,
        "--density",
        "0.1",
        "--patch-size",
        "16",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("row,col,raw,assigned"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 6);
    // patch areas: 16x16 in columns 0..1, 8 wide in column 2
    let weight = |col: f64| if col < 2.0 { 256.0 } else { 128.0 };
    let total: f64 = rows.iter().map(|r| weight(r[1])).sum();
    let mean: f64 = rows.iter().map(|r| weight(r[1]) * r[3]).sum::<f64>() / total;
    assert!((mean - 0.1).abs() <= 0.0005, "{mean}");
}

#[test]
fn mask_writes_plan_for_c2f() {
    let dir = TempDir::new().unwrap();
    let image = small_image(&dir);
    let plan = path_str(&dir, "plan.csv");
    let out = maskopt(&[
        "mask",
        "--image",
        &image,
        "--method",
        "c2f",
        "--generator",
        "dither",
        "--density",
        "0.1",
        "--patch-size",
        "16",
        "--output",
        &path_str(&dir, "m.pbm"),
        "--plan-csv",
        &plan,
    ]);
    assert!(out.status.success());
    assert!(std::fs::read_to_string(&plan)
        .unwrap()
        .starts_with("row,col,raw,assigned\n"));

    let out = maskopt(&[
        "mask",
        "--image",
        &image,
        "--method",
        "aa",
        "--density",
        "0.1",
        "--output",
        &path_str(&dir, "m.pbm"),
        "--plan-csv",
        &plan,
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_line(&out)["error"], "config");
}

#[test]
fn bench_writes_schema_and_masks() {
    let dir = TempDir::new().unwrap();
    let image = small_image(&dir);
    let csv_path = path_str(&dir, "out.csv");
    let masks = path_str(&dir, "masks");
    let out = maskopt(&[
        "bench",
        "--images",
        &image,
        "--methods",
        "aa,ps",
        "--densities",
        "0.05,0.1",
        "--removal-fraction",
        "0.05",
        "--output",
        &csv_path,
        "--mask-dir",
        &masks,
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let mut reader = csv::Reader::from_path(&csv_path).unwrap();
    let header: Vec<String> = reader
        .headers()
        .unwrap()
        .iter()
        .map(str::to_owned)
        .collect();
    assert_eq!(
        header,
        [
            "method",
            "image",
            "d_target",
            "d_achieved",
            "mse",
            "psnr",
            "wall_time_s",
            "cg_iters"
        ]
    );
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 4);
    let labels: Vec<&str> = rows.iter().map(|r| &r[0]).collect();
    assert_eq!(labels, ["AA", "PS", "AA", "PS"]);
    for r in &rows {
        assert_eq!(&r[1], "small.pgm");
        let target: f64 = r[2].parse().unwrap();
        let achieved: f64 = r[3].parse().unwrap();
        if &r[0] == "PS" {
            assert!((achieved - target).abs() < 1.0 / 1280.0 + 1e-6);
        }
        let mse: f64 = r[4].parse().unwrap();
        let psnr: f64 = r[5].parse().unwrap();
        assert!((psnr - 10.0 * (255.0f64 * 255.0 / mse).log10()).abs() < 1e-3);
        assert!(r[6].parse::<f64>().unwrap() >= 0.0);
        r[7].parse::<usize>().unwrap();
    }
    assert_eq!(std::fs::read_dir(&masks).unwrap().count(), 4);
}

#[test]
fn bench_with_no_densities_prints_only_the_header() {
    let dir = TempDir::new().unwrap();
    let image = small_image(&dir);
    let out = maskopt(&["bench", "--images", &image, "--densities", ""]);
    assert!(out.status.success());
    assert_eq!(
        stdout(&out),
        "method,image,d_target,d_achieved,mse,psnr,wall_time_s,cg_iters\n"
    );
}

#[test]
fn bench_keeps_going_past_an_unreadable_image() {
    let dir = TempDir::new().unwrap();
    let image = small_image(&dir);
    let missing = path_str(&dir, "missing.pgm");
    let out = maskopt(&[
        "bench",
        "--images",
        &missing,
        &image,
        "--methods",
        "aa",
        "--densities",
        "0.1",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[1], "AA,missing.pgm,0.1,,,,,");
    assert!(lines[2].starts_with("AA,small.pgm,0.1,"));
    assert_eq!(error_line(&out)["error"], "io");
}

#[test]
fn constant_image_reports_infinite_psnr() {
    let dir = TempDir::new().unwrap();
    let image = write_image(&dir, "flat.pgm", &Image::filled(16, 16, 1, 0.5).unwrap());
    let out = maskopt(&[
        "bench",
        "--images",
        &image,
        "--methods",
        "aa,ps",
        "--densities",
        "0.1",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for line in stdout(&out).lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields[4].parse::<f64>().unwrap(), 0.0);
        assert_eq!(fields[5], "inf");
    }
}

#[test]
fn colour_images_are_accepted() {
    let dir = TempDir::new().unwrap();
    let image = testdata("astronaut_rgb_64.ppm");
    let mask = path_str(&dir, "m.pbm");
    let out = maskopt(&[
        "mask",
        "--image",
        image.to_str().unwrap(),
        "--method",
        "aa",
        "--density",
        "0.1",
        "--output",
        &mask,
    ]);
    assert!(out.status.success());
    let restored = path_str(&dir, "u.ppm");
    let out = maskopt(&[
        "inpaint",
        "--image",
        image.to_str().unwrap(),
        "--mask",
        &mask,
        "--output",
        &restored,
    ]);
    assert!(out.status.success());
    assert_eq!(
        load_pnm(&std::fs::read(&restored).unwrap())
            .unwrap()
            .channels(),
        3
    );
}

#[test]
fn usage_errors_exit_with_two_and_a_json_line() {
    let out = maskopt(&[
        "mask",
        "--image",
        "x.pgm",
        "--method",
        "nope",
        "--density",
        "0.1",
        "--output",
        "y",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = error_line(&out);
    assert_eq!(err["error"], "usage");
    assert!(err["message"].as_str().unwrap().contains("nope"));

    let out = maskopt(&[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_with_one_and_a_json_line() {
    let dir = TempDir::new().unwrap();
    let image = small_image(&dir);

    let out = maskopt(&[
        "eval",
        "--image",
        &path_str(&dir, "none.pgm"),
        "--mask",
        "m.pbm",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_line(&out)["error"], "io");

    let out = maskopt(&[
        "mask",
        "--image",
        &image,
        "--method",
        "ps",
        "--density",
        "1.5",
        "--output",
        &path_str(&dir, "m.pbm"),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_line(&out)["error"], "config");

    let garbage = path_str(&dir, "garbage.pgm");
    std::fs::write(&garbage, b"P7 nonsense").unwrap();
    let out = maskopt(&["plan", "--image", &garbage, "--density", "0.1"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_line(&out)["error"], "parse");

    let mask = path_str(&dir, "m.pbm");
    std::fs::write(
        &mask,
        maskopt::save_pbm(&maskopt::Mask::full(8, 8).unwrap()),
    )
    .unwrap();
    let out = maskopt(&["eval", "--image", &image, "--mask", &mask]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_line(&out)["error"], "dimension");
}

#[test]
fn worker_count_comes_from_the_environment() {
    let dir = TempDir::new().unwrap();
    let image = small_image(&dir);
    let run = |workers: &str| {
        Command::new(env!("CARGO_BIN_EXE_maskopt"))
            .args([
                "mask",
                "--image",
                &image,
                "--method",
                "c2f",
                "--generator",
                "dither",
            ])
            .args([
                "--density",
                "0.1",
                "--patch-size",
                "16",
                "--output",
                &path_str(&dir, &format!("w{workers}.pbm")),
            ])
            .env("MASKOPT_WORKERS", workers)
            .output()
            .unwrap()
    };
    assert!(run("1").status.success());
    assert!(run("4").status.success());
    assert_eq!(
        std::fs::read(path_str(&dir, "w1.pbm")).unwrap(),
        std::fs::read(path_str(&dir, "w4.pbm")).unwrap()
    );

    let out = run("0");
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_line(&out)["error"], "config");

    // an unparsable value is a usage error
    assert_eq!(run("many").status.code(), Some(2));
}

#[test]
fn bench_ranks_sparsification_above_the_analytic_mask() {
    let dir = TempDir::new().unwrap();
    let mut images = Vec::new();
    for name in ["astronaut", "camera", "chelsea", "coffee", "rocket"] {
        let f = load_pnm(&std::fs::read(testdata(&format!("{name}_256.pgm"))).unwrap()).unwrap();
        let rect = maskopt::PatchRect {
            row: 0,
            col: 0,
            x: 96,
            y: 96,
            width: 48,
            height: 48,
        };
        images.push(write_image(&dir, &format!("{name}.pgm"), &f.crop(&rect)));
    }
    let mut args = vec!["bench", "--images"];
    args.extend(images.iter().map(String::as_str));
    args.extend([
        "--methods",
        "aa,ps",
        "--densities",
        "0.02,0.05,0.08",
        "--removal-fraction",
        "0.02",
    ]);
    let out = maskopt(&args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let text = stdout(&out);
    let rows: Vec<Vec<&str>> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect())
        .collect();
    assert_eq!(rows.len(), 30);
    let mean_psnr = |method: &str| {
        let v: Vec<f64> = rows
            .iter()
            .filter(|r| r[0] == method)
            .map(|r| r[5].parse().unwrap())
            .collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    assert!(
        mean_psnr("PS") > mean_psnr("AA"),
        "PS {} vs AA {}",
        mean_psnr("PS"),
        mean_psnr("AA")
    );
}
