use qrobust::data::load_iris;
use qrobust::train::train;
use qrobust::{Classifier64, Loss, ModelConfig, TrainConfig};

#[test]
fn readme_example_compiles_and_trains() -> qrobust::Result<()> {
    let data = load_iris::<f64>()?;
    let config = ModelConfig { n_qubits: 2, n_layers: 2, n_measured: 1, n_classes: 2, seed: 0 };
    let (model, history) = train(
        Classifier64::random(config)?,
        &data,
        &TrainConfig::vanilla(0.05, 30, 100, Loss::CrossEntropy, 0),
    )?;
    assert_eq!(history.epochs(), 100);
    assert_eq!(model.params.len(), 12);
    Ok(())
}
