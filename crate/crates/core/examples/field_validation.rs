//! Loads a field definition, checks it, and prints the vorticity and the
//! pulled-back metric along one trajectory.
//!
//!     cargo run --example field_validation -- crates/core/data/annulus.json

use epiconj::flow::{advance_flow, volume_defect, write_trajectory_csv};
use epiconj::geometry::{divergence, steadiness_residual, ChartPoint};
use epiconj::model::FieldModel;
use epiconj::ode::Tolerances;

fn main() -> epiconj::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/data/annulus.json").into());
    let model = FieldModel::load(&path)?;
    let samples = model.interior_samples(3);
    let div = samples.iter().map(|x| divergence(&model.velocity, &model.metric, x, 0.0).abs()).fold(0.0, f64::max);
    println!("{}: max |div u| = {div:.2e}, max |[u, curl u]| = {:.2e}", model.name, steadiness_residual(&model.velocity, &model.metric, &samples));

    let x = samples[samples.len() / 2];
    let x = ChartPoint::new(x.coords[0], x.coords[1], x.coords[2]);
    println!("omega at {:?} = {:?}", x.as_array(), model.vorticity_in_frame(&x)?.as_slice());
    let flow = advance_flow(&model, &x, 5.0, Tolerances::default())?;
    println!("volume defect at t = 5: {:.2e}", volume_defect(&model.metric, &flow, 5.0));
    let times: Vec<f64> = (0..=5).map(|k| k as f64).collect();
    write_trajectory_csv(&mut std::io::stdout(), &flow, &model.metric, &model.frame(&x)?, &times)
}
