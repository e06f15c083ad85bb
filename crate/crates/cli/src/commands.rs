use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use serde_json::json;

use jointshrink_core::estimators::{fit, GroupedSample};
use jointshrink_core::modelselect::{cross_validate, CvGrid, CvReport};
use jointshrink_core::rda::{fit_rda, fit_rda_cv, RdaModel};
use jointshrink_simlab::output::{
    experiment_csv, experiment_provenance, experiment_table, iris_csv, iris_provenance, iris_table,
};
use jointshrink_simlab::{
    beta_grid, run_experiment, run_iris, ExperimentSpec, Family, IrisSpec, Scenario, IRIS_METHODS, SIMULATION_METHODS,
};

use crate::args::{parse_folds, CvArgs, EstimateArgs, GridArgs, PredictArgs, ReproduceArgs, TableArg, TrainArgs};
use crate::error::{input, CliError, CliResult};
use crate::io::{matrix_csv, read_table, Outputs};

fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn load_groups(path: &Path) -> CliResult<(Vec<String>, Vec<String>, GroupedSample)> {
    let table = read_table(path)?;
    let (labels, groups) = table.grouped()?;
    let data = GroupedSample::new(groups)?;
    Ok((table.features, labels, data))
}

fn vector(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

fn grid(args: &GridArgs) -> CliResult<CvGrid> {
    let betas = args.beta_grid.clone().unwrap_or_else(beta_grid);
    Ok(CvGrid::new(betas, parse_folds(&args.folds)?, args.seed)?)
}

fn cv_curve_csv(report: &CvReport) -> String {
    let mut out = String::from("beta,cv_fit\n");
    for (b, v) in report.betas.iter().zip(&report.cv_curve) {
        out.push_str(&format!("{b},{}\n", v.map_or(String::new(), |x| format!("{x:.16e}"))));
    }
    out
}

fn announce(files: &[PathBuf]) {
    for f in files {
        println!("wrote {}", f.display());
    }
}

pub fn estimate(args: &EstimateArgs) -> CliResult<()> {
    let (_, labels, data) = load_groups(&args.model.input)?;
    let config = args.model.config(data.dim(), args.beta)?;
    let centering = args.center.centering(&config.loss);
    let locations = data.groups().iter().map(|g| centering.locate(g)).collect::<Result<Vec<_>, _>>()?;
    let fitted = fit(&data.centered(&locations)?, &config)?;

    let mut out = Outputs::default();
    for (k, s) in fitted.sigmas.iter().enumerate() {
        out.add(format!("sigma_{}.csv", k + 1), matrix_csv(s.as_matrix()));
    }
    out.add("center.csv", matrix_csv(fitted.center.as_matrix()));
    let summary = json!({
        "labels": labels,
        "sizes": data.sizes(),
        "locations": locations.iter().map(vector).collect::<Vec<_>>(),
        "centering": centering,
        "config": config,
        "iterations": fitted.iterations,
        "final_residual": fitted.final_residual,
        "objective_trace": fitted.objective_trace,
    });
    out.add("summary.json", to_json(&summary));
    announce(&out.commit(&args.model.out_dir)?);
    println!("converged after {} map evaluations", fitted.iterations);
    Ok(())
}

pub fn cv(args: &CvArgs) -> CliResult<()> {
    let (_, _, data) = load_groups(&args.model.input)?;
    let template = args.model.config(data.dim(), 1.0)?;
    let grid = grid(&args.grid)?;
    let report = cross_validate(&data, &template, &grid, args.center.centering(&template.loss))?;
    let mut out = Outputs::default();
    out.add("cv_report.json", to_json(&report));
    out.add("cv_curve.csv", cv_curve_csv(&report));
    announce(&out.commit(&args.model.out_dir)?);
    println!("chosen beta {}", report.chosen_beta);
    Ok(())
}

/// Model file: class labels and feature names around the core model document.
#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    labels: Vec<String>,
    features: Vec<String>,
    model: serde_json::Value,
}

pub fn rda_train(args: &TrainArgs) -> CliResult<()> {
    let (features, labels, data) = load_groups(&args.model.input)?;
    let mut out = Outputs::default();
    let model = match args.beta {
        Some(beta) => fit_rda(&data, &args.model.config(data.dim(), beta)?)?,
        None => {
            let template = args.model.config(data.dim(), 1.0)?;
            let (model, report) = fit_rda_cv(&data, &template, &grid(&args.grid)?)?;
            out.add("cv_report.json", to_json(&report));
            model
        }
    };
    let file = ModelFile {
        labels,
        features,
        model: serde_json::from_str(&model.to_json()?).map_err(|e| CliError::Solver(e.to_string()))?,
    };
    out.add("model.json", to_json(&file));
    announce(&out.commit(&args.model.out_dir)?);
    println!("fitted at beta {}", model.beta());
    Ok(())
}

pub fn rda_predict(args: &PredictArgs) -> CliResult<()> {
    let text = std::fs::read_to_string(&args.model).map_err(|e| input(format!("--model {}: {e}", args.model.display())))?;
    let file: ModelFile =
        serde_json::from_str(&text).map_err(|e| input(format!("--model {}: {e}", args.model.display())))?;
    let model = RdaModel::from_json(&file.model.to_string())
        .map_err(|e| input(format!("--model {}: {e}", args.model.display())))?;
    let table = read_table(&args.input)?;
    if table.dim() != model.dim() {
        return Err(input(format!(
            "--input has {} feature columns but the model expects {}",
            table.dim(),
            model.dim()
        )));
    }

    let mut csv = String::from("row,predicted");
    for l in &file.labels {
        csv.push_str(&format!(",score_{l}"));
    }
    csv.push('\n');
    let mut errors = 0;
    for (i, row) in table.rows.iter().enumerate() {
        let x = DVector::from_column_slice(row);
        let scores = model.scores(x.as_view())?;
        let k = model.classify(x.as_view())?;
        let predicted = &file.labels[k];
        if let Some(truth) = &table.labels {
            errors += usize::from(&truth[i] != predicted);
        }
        csv.push_str(&format!("{},{predicted}", i + 1));
        for s in scores {
            csv.push_str(&format!(",{s:.16e}"));
        }
        csv.push('\n');
    }
    let mut out = Outputs::default();
    out.add("predictions.csv", csv);
    announce(&out.commit(&args.out_dir)?);
    if table.labels.is_some() {
        println!(
            "misclassified {errors} of {} ({:.2}%)",
            table.rows.len(),
            100.0 * errors as f64 / table.rows.len() as f64
        );
    }
    Ok(())
}

pub fn reproduce(args: &ReproduceArgs) -> CliResult<()> {
    if args.trials == 0 {
        return Err(input("--trials must be positive"));
    }
    let mut out = Outputs::default();
    let name = match args.table {
        TableArg::Table1 => "table1",
        TableArg::Table2 => "table2",
        TableArg::Table3 => "table3",
    };
    match args.table {
        TableArg::Table1 | TableArg::Table2 => {
            let scenario = if matches!(args.table, TableArg::Table1) {
                Scenario::UnequalSpherical
            } else {
                Scenario::EqualSpherical
            };
            let ks = args.k.clone().unwrap_or_else(|| vec![3, 5]);
            let ps = args.p.clone().unwrap_or_else(|| vec![10, 20, 30]);
            let mut text = String::new();
            let mut provenance = Vec::new();
            for family in [Family::Gaussian, Family::T2] {
                for &k in &ks {
                    for &p in &ps {
                        let spec = ExperimentSpec::standard(scenario, family, k, p, args.trials, args.seed)?;
                        let report = run_experiment(&spec, &SIMULATION_METHODS)?;
                        let tag = format!("{name}_{}_k{k}_p{p}", format!("{family:?}").to_lowercase());
                        out.add(format!("{tag}.csv"), experiment_csv(&report));
                        let table = experiment_table(&report);
                        print!("{table}\n");
                        text.push_str(&table);
                        text.push('\n');
                        provenance.push(experiment_provenance(&report));
                    }
                }
            }
            out.add(format!("{name}.txt"), text);
            out.add(format!("{name}_provenance.json"), to_json(&provenance));
        }
        TableArg::Table3 => {
            let spec = IrisSpec::standard(args.trials, args.seed);
            let report = run_iris(&spec, &IRIS_METHODS)?;
            let table = iris_table(&report);
            print!("{table}");
            out.add(format!("{name}.csv"), iris_csv(&report));
            out.add(format!("{name}.txt"), table);
            out.add(format!("{name}_provenance.json"), to_json(&iris_provenance(&report)));
        }
    }
    announce(&out.commit(&args.out_dir)?);
    Ok(())
}
