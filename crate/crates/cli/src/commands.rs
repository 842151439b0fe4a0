use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use symog::fxp::{count_operations, quantize_model, QuantizedModel};
use symog::io::{load_checkpoint, load_mnist, load_quantized, save_checkpoint, save_quantized, Mnist};
use symog::nn::{build_arch, Network};
use symog::quant::{QuantPlan, DEFAULT_EXPONENT_RANGE};
use symog::train::telemetry::{self, bin_center, read_csv};
use symog::train::{self, reg_value, TrainConfig};

use crate::manifest::Manifest;
use crate::{Common, EvalArgs, Failure, PretrainArgs, QuantizeArgs, ReportArgs, TrainArgs};

type CmdResult = Result<(), Failure>;

const EVAL_CHUNK: usize = 1000;

fn data_dir(arg: &Option<PathBuf>) -> Result<PathBuf, Failure> {
    let dir = arg
        .clone()
        .ok_or_else(|| Failure::Usage("no data directory: pass --data or set SYMOG_DATA".into()))?;
    if !dir.is_dir() {
        return Err(Failure::Usage(format!("data directory {} does not exist", dir.display())));
    }
    Ok(dir)
}

fn load_data(dir: &Path) -> Result<Mnist, Failure> {
    let data = load_mnist(dir)?;
    eprintln!(
        "loaded {} training / {} test images from {} (mean {:.4}, std {:.4})",
        data.train.len(),
        data.test.len(),
        dir.display(),
        data.normalization.mean,
        data.normalization.std
    );
    Ok(data)
}

fn prepare_out(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir.join("checkpoints")).with_context(|| format!("creating {}", dir.display()))?;
    Ok(())
}

fn base_config(c: &Common, template: TrainConfig) -> TrainConfig {
    TrainConfig {
        batch_size: c.batch_size,
        lr_start: c.lr0,
        lr_end: c.lr_end,
        lr_decay: c.lr_decay.into(),
        momentum: c.momentum,
        seed: c.seed,
        ..template
    }
}

fn validate(cfg: &TrainConfig) -> Result<(), Failure> {
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn checkpoint_path(out: &Path, epoch: usize) -> PathBuf {
    out.join("checkpoints").join(format!("epoch-{epoch:03}.symc"))
}

pub fn pretrain(a: PretrainArgs) -> CmdResult {
    let c = &a.common;
    let dir = data_dir(&c.data)?;
    let cfg = TrainConfig {
        weight_decay: a.weight_decay,
        ..base_config(c, TrainConfig::pretrain(c.epochs))
    };
    validate(&cfg)?;
    let net = build_arch(&c.arch, c.seed).map_err(|e| Failure::Usage(e.to_string()))?;
    let data = load_data(&dir)?;
    prepare_out(&c.out)?;
    let mut manifest = Manifest::new("pretrain", &c.arch, &dir, &c.out, None, &cfg)?;
    manifest.write()?;

    let mut metrics = create(&c.out.join("metrics.csv"))?;
    writeln!(metrics, "epoch,lr,train_loss,test_error")?;
    save_checkpoint(&net, checkpoint_path(&c.out, 0))?;
    let net = train::pretrain_with(net, &data.train, &cfg, |r| -> Result<(), Failure> {
        let test_error = r.net.error_rate(&data.test.inputs, &data.test.labels, EVAL_CHUNK)?;
        writeln!(metrics, "{},{},{},{}", r.epoch, r.schedule.lr, r.train_loss, test_error)?;
        metrics.flush()?;
        save_checkpoint(r.net, checkpoint_path(&c.out, r.epoch))?;
        eprintln!("epoch {}/{} loss {:.5} test error {:.4}", r.epoch, cfg.epochs, r.train_loss, test_error);
        Ok(())
    })?;
    save_checkpoint(&net, c.out.join("model.symc"))?;
    manifest.finish()?;
    Ok(())
}

pub fn train(a: TrainArgs) -> CmdResult {
    let c = &a.common;
    let dir = data_dir(&c.data)?;
    let mut template = TrainConfig::symog(c.epochs);
    template.bits = a.bits;
    template.lambda_start = a.lambda0;
    if let Some(alpha) = a.alpha {
        template.lambda_growth = alpha;
    }
    template.clipping = !a.no_clip;
    let cfg = base_config(c, template);
    validate(&cfg)?;
    if !(2..=8).contains(&cfg.bits) {
        return Err(Failure::Usage(format!("--bits {} outside 2..=8", cfg.bits)));
    }
    let expected = build_arch(&c.arch, 0).map_err(|e| Failure::Usage(e.to_string()))?;
    let net = load_checkpoint(&a.init)?;
    if let Some(diff) = expected.architecture_mismatch(&net) {
        return Err(anyhow!("checkpoint {} does not match architecture {}: {diff}", a.init.display(), c.arch).into());
    }
    let data = load_data(&dir)?;
    prepare_out(&c.out)?;
    let mut manifest = Manifest::new("train", &c.arch, &dir, &c.out, Some(&a.init), &cfg)?;
    manifest.write()?;

    let plan = QuantPlan::select(&net, cfg.bits, cfg.exponent_range)?;
    fs::write(c.out.join("quant_plan.json"), serde_json::to_string_pretty(&plan)? + "\n")
        .context("writing quant_plan.json")?;

    let mut metrics = create(&c.out.join("metrics.csv"))?;
    writeln!(metrics, "epoch,lambda,lr,train_loss,reg,float_error,quant_error")?;
    let evaluate = |net: &Network| -> Result<(f64, f64, f64), Failure> {
        let float_error = net.error_rate(&data.test.inputs, &data.test.labels, EVAL_CHUNK)?;
        let model = quantize_model(net, &plan)?;
        let quant_error = model.error_rate(&data.test.inputs, &data.test.labels, EVAL_CHUNK)?;
        Ok((reg_value(net, &plan)?, float_error, quant_error))
    };
    let (reg, fe, qe) = evaluate(&net)?;
    writeln!(metrics, "0,,,,{reg},{fe},{qe}")?;
    eprintln!("epoch 0/{} float error {fe:.4} quantized error {qe:.4}", cfg.epochs);
    save_checkpoint(&net, checkpoint_path(&c.out, 0))?;

    let outcome = train::train_with(net, &data.train, &cfg, |r| -> Result<(), Failure> {
        if r.plan != Some(&plan) {
            return Err(anyhow!("trainer selected a different quantization plan").into());
        }
        let (reg, fe, qe) = evaluate(r.net)?;
        let s = &r.schedule;
        writeln!(metrics, "{},{},{},{},{reg},{fe},{qe}", r.epoch, s.lambda, s.lr, r.train_loss)?;
        metrics.flush()?;
        save_checkpoint(r.net, checkpoint_path(&c.out, r.epoch))?;
        let switched = r.telemetry.map_or(0.0, |t| {
            t.layers.iter().map(|l| l.switch_fraction).sum::<f64>() / t.layers.len().max(1) as f64
        });
        eprintln!(
            "epoch {}/{} λ {:.1} loss {:.5} float error {fe:.4} quantized error {qe:.4} switched {:.4}",
            r.epoch, cfg.epochs, s.lambda, r.train_loss, switched
        );
        Ok(())
    })?;
    let mut log = create(&c.out.join("telemetry.csv"))?;
    telemetry::write_csv(&outcome.telemetry, &mut log)?;
    log.flush()?;
    save_checkpoint(&outcome.net, c.out.join("model.symc"))?;
    manifest.finish()?;
    Ok(())
}

fn summary_path(out: &Path) -> PathBuf {
    let mut name = out.file_stem().unwrap_or_default().to_os_string();
    name.push(".summary.csv");
    out.with_file_name(name)
}

pub fn quantize(a: QuantizeArgs) -> CmdResult {
    let net = load_checkpoint(&a.checkpoint)?;
    let plan = match &a.plan {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let plan: QuantPlan = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            plan.check(&net).with_context(|| format!("plan {} does not fit the checkpoint", path.display()))?;
            plan
        }
        None => {
            if !(2..=8).contains(&a.bits) {
                return Err(Failure::Usage(format!("--bits {} outside 2..=8", a.bits)));
            }
            QuantPlan::select(&net, a.bits, DEFAULT_EXPONENT_RANGE)?
        }
    };
    let model = quantize_model(&net, &plan)?;
    save_quantized(&model, &a.out)?;

    let table = summary(&net, &plan, &model)?;
    let path = summary_path(&a.out);
    fs::write(&path, &table).with_context(|| format!("writing {}", path.display()))?;
    print!("{table}");
    Ok(())
}

/// Per-layer exponent, code histogram and mean quantization error.
fn summary(net: &Network, plan: &QuantPlan, model: &QuantizedModel) -> anyhow::Result<String> {
    let mut out = String::from("layer,bits,exponent,step,weights,mean_quant_error,code_counts\n");
    for q in model.quantized_layers() {
        let index = net.layers().iter().position(|l| l.name() == q.name()).expect("layer from this network");
        let spec = plan.specs()[index].expect("quantized layer has a spec");
        let cmax = spec.code_max();
        let mut counts = vec![0usize; (2 * cmax + 1) as usize];
        for &code in q.codes() {
            counts[(code + cmax) as usize] += 1;
        }
        let hist: Vec<String> = counts.iter().enumerate().map(|(i, n)| format!("{}:{n}", i as i32 - cmax)).collect();
        let mse = symog::quant::quantization_mse(net.layers()[index].weights.data(), &spec);
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            q.name(),
            spec.bits(),
            spec.exponent(),
            spec.step(),
            q.codes().len(),
            mse,
            hist.join(" ")
        )?;
    }
    Ok(out)
}

pub fn eval(a: EvalArgs) -> CmdResult {
    let dir = data_dir(&a.data)?;
    let model = load_quantized(&a.model)?;
    let data = load_data(&dir)?;
    let error = model.error_rate(&data.test.inputs, &data.test.labels, EVAL_CHUNK)?;
    let sample = &data.test.inputs.shape()[1..];
    let ops = count_operations(&model, sample)?;
    println!(
        "ops additions={} subtractions={} shifts={} multiplications={} bias_additions={} comparisons={} float_multiplications={}",
        ops.additions, ops.subtractions, ops.shifts, ops.multiplications, ops.bias_additions, ops.comparisons, ops.float_multiplications
    );
    println!("error_rate={error} mults={}", ops.multiplications);
    Ok(())
}

pub fn report(a: ReportArgs) -> CmdResult {
    let file = File::open(&a.telemetry).with_context(|| format!("opening {}", a.telemetry.display()))?;
    let records = read_csv(BufReader::new(file), &a.telemetry.display().to_string())?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;

    let mut hist = create(&a.out.join("histograms.csv"))?;
    writeln!(hist, "epoch,layer,bin,center,count")?;
    let mut switches = create(&a.out.join("switch_rates.csv"))?;
    writeln!(switches, "epoch,layer,switch_fraction")?;
    for r in &records {
        for l in &r.layers {
            for (i, count) in l.histogram.iter().enumerate() {
                writeln!(hist, "{},{},{i},{},{count}", r.epoch, l.layer, bin_center(i, l.clip_bound))?;
            }
            if r.epoch > 0 {
                writeln!(switches, "{},{},{}", r.epoch, l.layer, l.switch_fraction)?;
            }
        }
    }
    hist.flush()?;
    switches.flush()?;
    eprintln!("wrote {} epochs of telemetry to {}", records.len(), a.out.display());
    Ok(())
}
