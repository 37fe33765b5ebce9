use spinprobe_core::verify;

#[test]
#[ignore = "calibration probe"]
fn probe_c2() {
    println!("{}", verify::criterion_2().line());
}

#[test]
#[ignore = "calibration probe"]
fn probe_c3() {
    println!("{}", verify::criterion_3().line());
}

#[test]
#[ignore = "calibration probe"]
fn probe_c4ab() {
    println!("{}", verify::criterion_4a().line());
    println!("{}", verify::criterion_4b().line());
}

#[test]
#[ignore = "calibration probe"]
fn probe_c6() {
    println!("{}", verify::criterion_6().line());
}

#[test]
#[ignore = "calibration probe"]
fn probe_c7() {
    println!("{}", verify::criterion_7().line());
}

#[test]
#[ignore = "calibration probe"]
fn probe_c8() {
    println!("{}", verify::criterion_8().line());
}

#[test]
#[ignore = "calibration probe"]
fn probe_c9() {
    println!("{}", verify::criterion_9().line());
}
