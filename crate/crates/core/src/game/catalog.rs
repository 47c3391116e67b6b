//! Built-in example games.
//!
//! Resources are numbered from 0, so the first resource of an example is
//! action id 0. All welfares are separable and all utilities are marginal
//! contributions, which makes the welfare itself the potential.

use crate::error::{Error, Result};

use super::{GameSpec, PopulationSpec, ResourceFn, ResourceTerm, Welfare};

/// Target values of the sensor-target example.
pub const SENSOR_VALUES: [f64; 4] = [1.0, 2.0, 3.0, 4.0];
/// Detection probabilities of strong, moderate and weak sensors.
pub const SENSOR_DETECTION: [f64; 3] = [0.9, 0.5, 0.05];

fn term(resource: usize, counted: Option<Vec<usize>>, func: ResourceFn) -> ResourceTerm {
    ResourceTerm {
        resource,
        counted,
        func,
    }
}

/// Three resources: `W0 = 2k`, `W1 = min(3k, 3/2 n_counted)`, `W2 = k`.
///
/// `counted` restricts which populations contribute (and enter the cap).
pub fn example2_welfare(counted: Option<Vec<usize>>) -> Welfare {
    Welfare::Separable(vec![
        term(0, counted.clone(), ResourceFn::Linear { slope: 2.0 }),
        term(
            1,
            counted.clone(),
            ResourceFn::MinLinear {
                slope: 3.0,
                cap_per_player: 1.5,
            },
        ),
        term(2, counted, ResourceFn::Linear { slope: 1.0 }),
    ])
}

/// Two equal populations on resources `{0,1}` and `{1,2}`.
pub fn example2(n: u32, alpha: f64, beta: f64) -> Result<GameSpec> {
    if n < 2 || n % 2 != 0 {
        return Err(Error::InvalidGame(format!(
            "example2 needs an even player count >= 2, got {n}"
        )));
    }
    GameSpec::new(
        vec![
            PopulationSpec::new(n / 2, vec![0, 1]),
            PopulationSpec::new(n / 2, vec![1, 2]),
        ],
        example2_welfare(None),
        alpha,
        beta,
    )
}

/// Example-2 welfare with a third population fixed on resource 1 that
/// contributes nothing.
pub fn example3(n1: u32, n2: u32, n3: u32, alpha: f64, beta: f64) -> Result<GameSpec> {
    GameSpec::new(
        vec![
            PopulationSpec::new(n1, vec![0, 1]),
            PopulationSpec::new(n2, vec![1, 2]),
            PopulationSpec::new(n3, vec![1]),
        ],
        example2_welfare(Some(vec![0, 1])),
        alpha,
        beta,
    )
}

/// Exponential welfares `(e^{r x} - 1) / e^2` with rates 1, 2, 2.5 on the
/// three resources, `x` the occupancy fraction.
pub fn example4_welfare() -> Welfare {
    let scale = (-2.0f64).exp();
    Welfare::Separable(
        [1.0, 2.0, 2.5]
            .iter()
            .enumerate()
            .map(|(r, &rate)| term(r, None, ResourceFn::ExpFraction { rate, scale }))
            .collect(),
    )
}

pub fn example4(n: u32, alpha: f64, beta: f64) -> Result<GameSpec> {
    if n < 2 || n % 2 != 0 {
        return Err(Error::InvalidGame(format!(
            "example4 needs an even player count >= 2, got {n}"
        )));
    }
    GameSpec::new(
        vec![
            PopulationSpec::new(n / 2, vec![0, 1]),
            PopulationSpec::new(n / 2, vec![1, 2]),
        ],
        example4_welfare(),
        alpha,
        beta,
    )
}

/// `2k - 1` resources; resource `k - 1` is shared and pays `c^2 / n^2`,
/// every other pays `c / 4n`.
pub fn example5_welfare(k: usize) -> Welfare {
    Welfare::Separable(
        (0..2 * k - 1)
            .map(|r| {
                let func = if r == k - 1 {
                    ResourceFn::Power {
                        coef: 1.0,
                        exponent: 2,
                        n_power: 2,
                    }
                } else {
                    ResourceFn::Power {
                        coef: 0.25,
                        exponent: 1,
                        n_power: 1,
                    }
                };
                term(r, None, func)
            })
            .collect(),
    )
}

pub fn example5(n: u32, k: usize, alpha: f64, beta: f64) -> Result<GameSpec> {
    if k < 2 {
        return Err(Error::InvalidGame(format!(
            "example5 needs k >= 2, got {k}"
        )));
    }
    if n < 2 || n % 2 != 0 {
        return Err(Error::InvalidGame(format!(
            "example5 needs an even player count >= 2, got {n}"
        )));
    }
    GameSpec::new(
        vec![
            PopulationSpec::new(n / 2, (0..k).collect()),
            PopulationSpec::new(n / 2, (k - 1..2 * k - 1).collect()),
        ],
        example5_welfare(k),
        alpha,
        beta,
    )
}

/// Value-weighted detection probability per region.
pub fn sensor_target_welfare(values: &[f64], detection: &[f64]) -> Welfare {
    Welfare::Separable(
        values
            .iter()
            .enumerate()
            .map(|(r, &value)| {
                term(
                    r,
                    None,
                    ResourceFn::Detection {
                        value,
                        detect: detection.to_vec(),
                    },
                )
            })
            .collect(),
    )
}

/// One population per sensor type, every sensor free to pick any region.
pub fn sensor_target(
    counts: &[u32],
    values: &[f64],
    detection: &[f64],
    alpha: f64,
    beta: f64,
) -> Result<GameSpec> {
    if counts.len() != detection.len() {
        return Err(Error::InvalidGame(format!(
            "{} sensor types but {} detection probabilities",
            counts.len(),
            detection.len()
        )));
    }
    let regions: Vec<usize> = (0..values.len()).collect();
    GameSpec::new(
        counts
            .iter()
            .map(|&c| PopulationSpec::new(c, regions.clone()))
            .collect(),
        sensor_target_welfare(values, detection),
        alpha,
        beta,
    )
}

/// The reference sensor game: one strong, `n_m` moderate, `n_w` weak sensors.
pub fn example6(n_m: u32, n_w: u32, alpha: f64, beta: f64) -> Result<GameSpec> {
    sensor_target(
        &[1, n_m, n_w],
        &SENSOR_VALUES,
        &SENSOR_DETECTION,
        alpha,
        beta,
    )
}

/// Look up a catalog welfare by name. `params` carries named numeric
/// parameters (`k` for example5, `values`/`detection` for sensor_target).
pub fn welfare_by_name(
    name: &str,
    params: &CatalogParams,
    populations: &[PopulationSpec],
) -> Result<Welfare> {
    match name {
        "example2" => Ok(example2_welfare(None)),
        "example3" => {
            let counted = params
                .counted
                .clone()
                .unwrap_or_else(|| vec![0, 1].into_iter().filter(|&p| p < populations.len()).collect());
            Ok(example2_welfare(Some(counted)))
        }
        "example4" => Ok(example4_welfare()),
        "example5" => {
            let k = params.k.ok_or_else(|| Error::Config {
                key: "welfare.k".into(),
                line: None,
                message: "example5 needs parameter k".into(),
            })?;
            if k < 2 {
                return Err(Error::Config {
                    key: "welfare.k".into(),
                    line: None,
                    message: format!("k must be >= 2, got {k}"),
                });
            }
            Ok(example5_welfare(k))
        }
        "sensor_target" => {
            let values = params.values.clone().unwrap_or_else(|| SENSOR_VALUES.to_vec());
            let detection = params
                .detection
                .clone()
                .unwrap_or_else(|| SENSOR_DETECTION.to_vec());
            Ok(sensor_target_welfare(&values, &detection))
        }
        other => Err(Error::Config {
            key: "welfare.catalog".into(),
            line: None,
            message: format!(
                "unknown catalog welfare '{other}' (known: example2, example3, example4, example5, sensor_target)"
            ),
        }),
    }
}

/// Optional parameters for catalog welfares.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CatalogParams {
    pub k: Option<usize>,
    pub counted: Option<Vec<usize>>,
    pub values: Option<Vec<f64>>,
    pub detection: Option<Vec<f64>>,
}
