//! Built-in scenarios.

use serde::Serialize;

use crate::spec::ScenarioKind;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ScenarioInfo {
    pub name: &'static str,
    pub process: &'static str,
    pub potential: &'static str,
    pub msd: &'static str,
    pub routes: &'static [&'static str],
}

pub const BUILT_INS: [(ScenarioKind, ScenarioInfo); 4] = [
    (
        ScenarioKind::FreeBrownian,
        ScenarioInfo {
            name: "free_brownian",
            process: "standard: dS/dt + |grad S|^2/2 + (Q - Omega) = 0, b = 0",
            potential: "Omega = 0",
            msd: "<x^2> = 2 dim D (t + t0), t0 = alpha^2/4D",
            routes: &["analytic", "fp", "sde"],
        },
    ),
    (
        ScenarioKind::FreeRecoil,
        ScenarioInfo {
            name: "free_recoil",
            process: "recoil: dS/dt + |grad S|^2/2 - (Q - Omega) = 0, b = 2D(2Dt - alpha^2)x/(alpha^4 + 4D^2t^2)",
            potential: "Omega = 0, Omega_r = 2Q",
            msd: "<x^2> = alpha^2/2 + 2D^2t^2/alpha^2",
            routes: &["analytic", "schrodinger", "fp", "sde"],
        },
    ),
    (
        ScenarioKind::HarmonicRecoil,
        ScenarioInfo {
            name: "harmonic_recoil",
            process: "recoil in a harmonic potential, i dpsi/dt = -D psi'' + (Omega/2D) psi",
            potential: "Omega = gamma^2 x^2/2 - D gamma",
            msd: "<x^2> = s0 cos^2(gamma t) + (D/gamma)^2/s0 sin^2(gamma t), s0 = alpha^2/2",
            routes: &["analytic", "schrodinger", "fp", "sde"],
        },
    ),
    (
        ScenarioKind::SmoluchowskiOu,
        ScenarioInfo {
            name: "smoluchowski_ou",
            process: "standard: dX = (F/m beta) dt + sqrt(2D) dW, F = -m beta gamma x",
            potential: "Omega = F^2/(2 m^2 beta^2) + (D/m beta) F' = gamma^2 x^2/2 - D gamma",
            msd: "<x^2> = D/gamma + (alpha^2/2 - D/gamma) exp(-2 gamma t)",
            routes: &["analytic", "fp", "sde"],
        },
    ),
];

pub fn table_text() -> String {
    let mut s = format!("{:<17} {:<32} {}\n", "scenario", "routes", "<x^2>(t)");
    for (_, info) in &BUILT_INS {
        s.push_str(&format!("{:<17} {:<32} {}\n", info.name, info.routes.join(","), info.msd));
    }
    s
}

pub fn json() -> String {
    let infos: Vec<&ScenarioInfo> = BUILT_INS.iter().map(|(_, i)| i).collect();
    serde_json::to_string_pretty(&infos).expect("serializable list")
}
