//! Bessel values checked against an independent reference table
//! (generated once with SciPy's `jv` and frozen here).

use spinforge::models::bessel_j;

const TABLE: &[(u32, f64, f64)] = &[
    (0, 0.5, 0.938469807240813),
    (0, 1.6262104442160066, 0.44043209066740985),
    (0, 3.252420888432013, -0.3333333333333334),
    (0, 7.0, 0.30007927051955563),
    (0, 11.9, 0.025049441699589774),
    (0, 12.5, 0.1468840547004211),
    (0, 25.0, 0.09626678327595811),
    (0, 60.0, -0.09147180408906189),
    (0, 99.0, -0.05447423527049908),
    (0, -4.3, -0.3610111172365351),
    (1, 0.5, 0.2422684576748739),
    (1, 1.6262104442160066, 0.5723557474706935),
    (1, 3.252420888432013, 0.24013425616537173),
    (1, 7.0, -0.0046828234823457346),
    (1, 11.9, -0.22898324966192407),
    (1, 12.5, -0.16548380461475973),
    (1, 25.0, -0.1253502495802899),
    (1, 60.0, 0.04659838375816632),
    (1, 99.0, -0.059122942553074084),
    (1, -4.3, 0.17189656022154046),
    (2, 0.5, 0.030604023458682638),
    (2, 1.6262104442160066, 0.2634814151231958),
    (2, 3.252420888432013, 0.480998266257276),
    (2, 7.0, -0.3014172200859401),
    (2, 11.9, -0.06353402147470306),
    (2, 12.5, -0.17336146343878264),
    (2, 25.0, -0.10629480324238133),
    (2, 60.0, 0.09302508354766742),
    (2, 99.0, 0.053279832390639),
    (2, -4.3, 0.2810592287614),
    (3, 0.5, 0.002563729994587244),
    (3, 1.6262104442160066, 0.07573113712736888),
    (3, 3.252420888432013, 0.35142296567889547),
    (3, 7.0, -0.16755558799533432),
    (3, 11.9, 0.20762727605698186),
    (3, 12.5, 0.11000813631434929),
    (3, 25.0, 0.10834308106150892),
    (3, 60.0, -0.040396711521655165),
    (3, 99.0, 0.06127566305370595),
    (3, -4.3, -0.4333470055809823),
    (5, 0.5, 8.053627241357477e-06),
    (5, 1.6262104442160066, 0.0026504148223096984),
    (5, 3.252420888432013, 0.06008511239116902),
    (5, 7.0, 0.3478963247511832),
    (5, 11.9, -0.0945381715083846),
    (5, 12.5, 0.034737699762239706),
    (5, 25.0, -0.06600799539842298),
    (5, 60.0, 0.0274547442283441),
    (5, 99.0, -0.06528100898032652),
    (5, -4.3, -0.1687199927151233),
    (8, 0.5, 3.758223154797609e-10),
    (8, 1.6262104442160066, 4.401816812292948e-06),
    (8, 3.252420888432013, 0.0009001924376599977),
    (8, 7.0, 0.12797053402821254),
    (8, 11.9, 0.06506750553055851),
    (8, 12.5, -0.05382403945501135),
    (8, 25.0, 0.15300616665739886),
    (8, 60.0, -0.1033034269389579),
    (8, 99.0, -0.033003867036866),
    (8, -4.3, 0.0066805403772078635),
    (13, 0.5, 2.382323271215502e-18),
    (13, 1.6262104442160066, 1.0401255756868577e-11),
    (13, 3.252420888432013, 7.386786086778825e-08),
    (13, 7.0, 0.0007702215725221324),
    (13, 11.9, 0.11371515342303673),
    (13, 12.5, 0.15432407893852712),
    (13, 25.0, 0.0982828758435886),
    (13, 60.0, -0.08393822925995792),
    (13, 99.0, -0.08007099520999708),
    (13, -4.3, -2.412135151798533e-06),
    (20, 0.5, 3.7272019617047014e-31),
    (20, 1.6262104442160066, 6.355178522161505e-21),
    (20, 3.252420888432013, 6.061237259851781e-15),
    (20, 7.0, 1.731490333030694e-08),
    (20, 11.9, 0.00021920024856698176),
    (20, 12.5, 0.00048433775975865415),
    (20, 25.0, 0.051994049228303106),
    (20, 60.0, 0.10266020557876335),
    (20, 99.0, 0.07763240401855268),
    (20, -4.3, 1.4674511127878696e-12),
];

#[test]
fn matches_reference_table() {
    for &(n, x, want) in TABLE {
        let got = bessel_j(n, x).unwrap();
        assert!((got - want).abs() < 1e-12, "J_{n}({x}) = {got}, want {want}");
    }
}

#[test]
fn first_zero_by_independent_root_find() {
    // Secant iteration on J0 from the power series alone.
    let f = |x: f64| bessel_j(0, x).unwrap();
    let (mut a, mut b) = (2.0, 3.0);
    for _ in 0..60 {
        let c = b - f(b) * (b - a) / (f(b) - f(a));
        a = b;
        b = c;
        if (b - a).abs() < 1e-14 {
            break;
        }
    }
    assert!((b - 2.404826).abs() < 1e-5);
    assert!(f(2.404826).abs() < 1e-5);
}
