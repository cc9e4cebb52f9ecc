//! On-disk formats: datasets, network files, spike trains and mappings.
//! Every writer goes through [`atomic_write`].

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use crate::data::{DatasetManifest, Sample};
use crate::error::{Error, Result};
use crate::snn::{ConvShape, LayerKind, LayerSpec, NetworkTopology, NeuronParams, PoolShape, ResetMode, SpikeTrain};

/// Writes to a temporary file in the destination directory, then renames it
/// into place.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

/// Parses `key=value` tokens of a `#` header line.
fn header_fields(line: &str) -> Vec<(&str, &str)> {
    line.trim_start_matches('#')
        .split_whitespace()
        .filter_map(|tok| tok.split_once('='))
        .collect()
}

// ---------------------------------------------------------------- datasets

pub const DATASET_MAGIC: &[u8; 8] = b"ESPKDS01";

pub fn dataset_to_text(d: &DatasetManifest) -> String {
    let mut s = format!(
        "# n_features={} n_classes={} range={},{}\n",
        d.n_features, d.n_classes, d.range.0, d.range.1
    );
    for sample in &d.samples {
        s.push_str(&sample.label.to_string());
        for f in &sample.features {
            let _ = write!(s, ", {f}");
        }
        s.push('\n');
    }
    s
}

pub fn parse_dataset_text(text: &str, path: &str) -> Result<DatasetManifest> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .find(|(_, l)| !l.trim().is_empty())
        .ok_or_else(|| Error::parse(path, 1, "empty dataset file"))?;
    let mut n_features = None;
    let mut n_classes = None;
    let mut range = (0.0, 1.0);
    if !header.starts_with('#') {
        return Err(Error::parse(
            path,
            1,
            "missing header '# n_features=F n_classes=K range=LO,HI'",
        ));
    }
    for (k, v) in header_fields(header) {
        let bad = || Error::parse(path, 1, format!("bad header value {k}={v}"));
        match k {
            "n_features" => n_features = Some(v.parse::<usize>().map_err(|_| bad())?),
            "n_classes" => n_classes = Some(v.parse::<usize>().map_err(|_| bad())?),
            "range" => {
                let (lo, hi) = v.split_once(',').ok_or_else(bad)?;
                range = (lo.parse().map_err(|_| bad())?, hi.parse().map_err(|_| bad())?);
            }
            _ => {}
        }
    }
    let n_features = n_features.ok_or_else(|| Error::parse(path, 1, "header lacks n_features"))?;
    let n_classes = n_classes.ok_or_else(|| Error::parse(path, 1, "header lacks n_classes"))?;
    let mut samples = Vec::new();
    for (i, line) in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split(',').map(str::trim);
        let label = fields
            .next()
            .and_then(|l| l.parse::<usize>().ok())
            .ok_or_else(|| Error::parse(path, i + 1, "row must start with an integer label"))?;
        let features = fields
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::parse(path, i + 1, format!("bad feature value: {e}")))?;
        if features.len() != n_features {
            return Err(Error::parse(
                path,
                i + 1,
                format!("{} features, header declares {n_features}", features.len()),
            ));
        }
        if label >= n_classes {
            return Err(Error::parse(path, i + 1, format!("label {label} outside [0, {n_classes})")));
        }
        if let Some(f) = features.iter().find(|f| !(range.0..=range.1).contains(*f)) {
            return Err(Error::parse(
                path,
                i + 1,
                format!("feature {f} outside declared range [{}, {}]", range.0, range.1),
            ));
        }
        samples.push(Sample { features, label });
    }
    let d = DatasetManifest {
        n_features,
        n_classes,
        range,
        samples,
    };
    d.validate()?;
    Ok(d)
}

/// Packed layout, all little-endian: magic, `u32` n_features, `u32`
/// n_classes, `f64` range low and high, `u64` n_samples, then per sample a
/// `u32` label followed by `n_features` `f64` values.
pub fn dataset_to_binary(d: &DatasetManifest) -> Vec<u8> {
    let mut b = Vec::with_capacity(40 + d.samples.len() * (4 + 8 * d.n_features));
    b.extend_from_slice(DATASET_MAGIC);
    b.extend_from_slice(&(d.n_features as u32).to_le_bytes());
    b.extend_from_slice(&(d.n_classes as u32).to_le_bytes());
    b.extend_from_slice(&d.range.0.to_le_bytes());
    b.extend_from_slice(&d.range.1.to_le_bytes());
    b.extend_from_slice(&(d.samples.len() as u64).to_le_bytes());
    for s in &d.samples {
        b.extend_from_slice(&(s.label as u32).to_le_bytes());
        for f in &s.features {
            b.extend_from_slice(&f.to_le_bytes());
        }
    }
    b
}

pub fn parse_dataset_binary(bytes: &[u8], path: &str) -> Result<DatasetManifest> {
    let truncated = || Error::parse(path, 0, "binary dataset is truncated");
    let mut pos = 0usize;
    let mut take = |n: usize| -> Result<&[u8]> {
        let s = bytes.get(pos..pos + n).ok_or_else(truncated)?;
        pos += n;
        Ok(s)
    };
    if take(8)? != DATASET_MAGIC {
        return Err(Error::parse(path, 0, "bad magic number"));
    }
    let u32_at = |s: &[u8]| u32::from_le_bytes(s.try_into().expect("4 bytes")) as usize;
    let f64_at = |s: &[u8]| f64::from_le_bytes(s.try_into().expect("8 bytes"));
    let n_features = u32_at(take(4)?);
    let n_classes = u32_at(take(4)?);
    let range = (f64_at(take(8)?), f64_at(take(8)?));
    let n_samples = u64::from_le_bytes(take(8)?.try_into().expect("8 bytes")) as usize;
    let mut samples = Vec::with_capacity(n_samples.min(1 << 20));
    for _ in 0..n_samples {
        let label = u32_at(take(4)?);
        let features = (0..n_features).map(|_| take(8).map(f64_at)).collect::<Result<Vec<_>>>()?;
        samples.push(Sample { features, label });
    }
    if pos != bytes.len() {
        return Err(Error::parse(path, 0, "trailing bytes after the last sample"));
    }
    let d = DatasetManifest {
        n_features,
        n_classes,
        range,
        samples,
    };
    d.validate()?;
    Ok(d)
}

/// Reads either dataset variant, recognizing the binary one by its magic.
pub fn read_dataset(path: &Path) -> Result<DatasetManifest> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(DATASET_MAGIC) {
        parse_dataset_binary(&bytes, &display(path))
    } else {
        let text = String::from_utf8(bytes).map_err(|_| Error::parse(display(path), 0, "dataset is neither text nor packed binary"))?;
        parse_dataset_text(&text, &display(path))
    }
}

/// Writes the packed variant when the file name ends in `.bin`.
pub fn write_dataset(path: &Path, d: &DatasetManifest) -> Result<()> {
    if path.extension().is_some_and(|e| e == "bin") {
        atomic_write(path, &dataset_to_binary(d))
    } else {
        atomic_write(path, dataset_to_text(d).as_bytes())
    }
}

// ---------------------------------------------------------------- networks

pub const NETWORK_FORMAT: &str = "edgespike-network 1";

fn join(values: &[f64]) -> String {
    let mut s = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{v}");
    }
    s
}

/// Text rendering of a network. Floats use Rust's shortest round-trip
/// form, so load-then-save reproduces the file exactly.
pub fn network_to_text(net: &NetworkTopology) -> String {
    let mut s = format!("{NETWORK_FORMAT}\n\n[meta]\nlayers = {}\ntimesteps = {}\n", net.layers().len(), net.n_timesteps());
    for (k, layer) in net.layers().iter().enumerate() {
        let _ = write!(s, "\n[layer {k}]\nkind = {}\n", layer.kind().name());
        match layer.kind() {
            LayerKind::Dense => {
                let _ = write!(s, "n_in = {}\nn_out = {}\n", layer.n_in(), layer.n_out());
            }
            LayerKind::Conv2d(c) => {
                let _ = write!(
                    s,
                    "in_channels = {}\nin_h = {}\nin_w = {}\nout_channels = {}\nkernel = {}\npadding = {}\n",
                    c.in_channels, c.in_h, c.in_w, c.out_channels, c.kernel, c.padding
                );
            }
            LayerKind::Pool2x2(p) => {
                let _ = write!(s, "channels = {}\nin_h = {}\nin_w = {}\n", p.channels, p.in_h, p.in_w);
            }
        }
        if let Some(p) = layer.params() {
            let _ = write!(
                s,
                "beta = {}\nv_th = {}\nv_reset = {}\nreset = {}\n",
                p.beta,
                p.v_th_base,
                p.v_reset,
                p.reset_mode.as_str()
            );
        }
        if layer.has_weights() {
            let row = match layer.kind() {
                LayerKind::Conv2d(c) => c.in_channels * c.kernel * c.kernel,
                _ => layer.n_in(),
            };
            let _ = write!(s, "\n[weights {k}]\n");
            for chunk in layer.weights().chunks(row) {
                s.push_str(&join(chunk));
                s.push('\n');
            }
        }
    }
    s
}

struct Section<'a> {
    name: String,
    line: usize,
    body: Vec<(usize, &'a str)>,
}

fn sections<'a>(text: &'a str, path: &str) -> Result<Vec<Section<'a>>> {
    let mut out: Vec<Section> = Vec::new();
    let mut lines = text.lines().enumerate();
    match lines.find(|(_, l)| !l.trim().is_empty()) {
        Some((_, l)) if l.trim() == NETWORK_FORMAT => {}
        Some((i, l)) => {
            return Err(Error::parse(
                path,
                i + 1,
                format!("expected '{NETWORK_FORMAT}', found '{}'", l.trim()),
            ))
        }
        None => return Err(Error::parse(path, 1, "empty network file")),
    }
    for (i, raw) in lines {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            out.push(Section {
                name: name.trim().to_string(),
                line: i + 1,
                body: Vec::new(),
            });
        } else {
            match out.last_mut() {
                Some(sec) => sec.body.push((i + 1, line)),
                None => return Err(Error::parse(path, i + 1, "content before the first section")),
            }
        }
    }
    Ok(out)
}

struct Keys<'a, 'p> {
    section: &'a Section<'a>,
    path: &'p str,
    map: Vec<(usize, &'a str, &'a str)>,
}

impl<'a, 'p> Keys<'a, 'p> {
    fn new(section: &'a Section<'a>, path: &'p str) -> Result<Self> {
        let map = section
            .body
            .iter()
            .map(|&(n, l)| {
                l.split_once('=')
                    .map(|(k, v)| (n, k.trim(), v.trim()))
                    .ok_or_else(|| Error::parse(path, n, format!("[{}]: expected 'key = value'", section.name)))
            })
            .collect::<Result<_>>()?;
        Ok(Keys { section, path, map })
    }

    fn err(&self, line: usize, msg: String) -> Error {
        Error::parse(self.path, line, format!("[{}]: {msg}", self.section.name))
    }

    fn raw(&self, key: &str) -> Result<(usize, &'a str)> {
        self.map
            .iter()
            .find(|(_, k, _)| *k == key)
            .map(|&(n, _, v)| (n, v))
            .ok_or_else(|| self.err(self.section.line, format!("missing key '{key}'")))
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let (n, v) = self.raw(key)?;
        v.parse().map_err(|_| self.err(n, format!("bad value '{v}' for '{key}'")))
    }
}

fn parse_params(keys: &Keys) -> Result<NeuronParams> {
    let (n, reset) = keys.raw("reset")?;
    let reset_mode = ResetMode::parse(reset).ok_or_else(|| keys.err(n, format!("unknown reset mode '{reset}'")))?;
    let p = NeuronParams {
        beta: keys.get("beta")?,
        v_th_base: keys.get("v_th")?,
        v_reset: keys.get("v_reset")?,
        reset_mode,
    };
    p.validate().map_err(|e| keys.err(keys.section.line, e.to_string()))?;
    Ok(p)
}

pub fn parse_network(text: &str, path: &str) -> Result<NetworkTopology> {
    let secs = sections(text, path)?;
    let meta = secs
        .iter()
        .find(|s| s.name == "meta")
        .ok_or_else(|| Error::parse(path, 1, "missing [meta] section"))?;
    let meta_keys = Keys::new(meta, path)?;
    let n_layers: usize = meta_keys.get("layers")?;
    let timesteps: usize = meta_keys.get("timesteps")?;
    let find = |name: String| secs.iter().find(|s| s.name == name);
    let mut layers = Vec::with_capacity(n_layers);
    for k in 0..n_layers {
        let sec = find(format!("layer {k}")).ok_or_else(|| Error::parse(path, meta.line, format!("missing [layer {k}] section")))?;
        let keys = Keys::new(sec, path)?;
        let (kind_line, kind) = keys.raw("kind")?;
        let weights = || -> Result<Vec<f64>> {
            let ws = find(format!("weights {k}"))
                .ok_or_else(|| Error::parse(path, sec.line, format!("[layer {k}]: missing [weights {k}] section")))?;
            let mut w = Vec::new();
            for &(n, line) in &ws.body {
                for tok in line.split_whitespace() {
                    w.push(tok.parse::<f64>().map_err(|_| Error::parse(path, n, format!("[weights {k}]: bad number '{tok}'")))?);
                }
            }
            Ok(w)
        };
        let wrap = |e: Error, line: usize| match e {
            Error::Parse { .. } => e,
            other => Error::parse(path, line, format!("[layer {k}]: {other}")),
        };
        let layer = match kind {
            "dense" => {
                let p = parse_params(&keys)?;
                LayerSpec::dense(keys.get("n_in")?, keys.get("n_out")?, weights()?, p)
            }
            "conv2d" => {
                let p = parse_params(&keys)?;
                let shape = ConvShape {
                    in_channels: keys.get("in_channels")?,
                    in_h: keys.get("in_h")?,
                    in_w: keys.get("in_w")?,
                    out_channels: keys.get("out_channels")?,
                    kernel: keys.get("kernel")?,
                    padding: keys.get("padding")?,
                };
                LayerSpec::conv2d(shape, weights()?, p)
            }
            "pool2x2" => LayerSpec::pool2x2(PoolShape {
                channels: keys.get("channels")?,
                in_h: keys.get("in_h")?,
                in_w: keys.get("in_w")?,
            }),
            other => return Err(keys.err(kind_line, format!("unknown layer kind '{other}'"))),
        }
        .map_err(|e| wrap(e, sec.line))?;
        layers.push(layer);
    }
    NetworkTopology::new(layers, timesteps).map_err(|e| match e {
        Error::Parse { .. } => e,
        other => Error::parse(path, meta.line, format!("[meta]: {other}")),
    })
}

pub fn read_network(path: &Path) -> Result<NetworkTopology> {
    parse_network(&read_text(path)?, &display(path))
}

pub fn write_network(path: &Path, net: &NetworkTopology) -> Result<()> {
    atomic_write(path, network_to_text(net).as_bytes())
}

// ---------------------------------------------------------------- spike trains

pub fn spikes_to_text(train: &SpikeTrain) -> String {
    let mut s = format!("# neurons={} timesteps={}\n", train.n_neurons(), train.n_timesteps());
    for (t, n) in train.events() {
        let _ = writeln!(s, "{t} {n}");
    }
    s
}

pub fn parse_spikes(text: &str, path: &str) -> Result<SpikeTrain> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::parse(path, 1, "empty spike file"))?;
    let (mut n, mut steps) = (None, None);
    for (k, v) in header_fields(header) {
        match k {
            "neurons" => n = v.parse::<usize>().ok(),
            "timesteps" => steps = v.parse::<usize>().ok(),
            _ => {}
        }
    }
    let (Some(n), Some(steps)) = (n, steps) else {
        return Err(Error::parse(path, 1, "header must be '# neurons=N timesteps=T'"));
    };
    let mut train = SpikeTrain::new(n, steps);
    for (i, line) in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace().map(str::parse::<usize>);
        match (it.next(), it.next(), it.next()) {
            (Some(Ok(t)), Some(Ok(id)), None) if t < steps && id < n => train.set(t, id, true),
            _ => return Err(Error::parse(path, i + 1, format!("expected 't neuron_id' within {steps} x {n}"))),
        }
    }
    Ok(train)
}

pub fn read_spikes(path: &Path) -> Result<SpikeTrain> {
    parse_spikes(&read_text(path)?, &display(path))
}

pub fn write_spikes(path: &Path, train: &SpikeTrain) -> Result<()> {
    atomic_write(path, spikes_to_text(train).as_bytes())
}

// ---------------------------------------------------------------- mappings

pub fn mapping_to_text(assignment: &[usize]) -> String {
    let mut s = String::from("# neuron_id core_id\n");
    for (n, c) in assignment.iter().enumerate() {
        let _ = writeln!(s, "{n} {c}");
    }
    s
}

/// Parses a mapping file into a neuron-to-core assignment. Every neuron id
/// from 0 to the largest listed one must appear exactly once.
pub fn parse_mapping(text: &str, path: &str) -> Result<Vec<usize>> {
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace().map(str::parse::<usize>);
        match (it.next(), it.next(), it.next()) {
            (Some(Ok(n)), Some(Ok(c)), None) => pairs.push((i + 1, n, c)),
            _ => return Err(Error::parse(path, i + 1, "expected 'neuron_id core_id'")),
        }
    }
    let n = pairs.iter().map(|p| p.1 + 1).max().unwrap_or(0);
    let mut assignment = vec![usize::MAX; n];
    for (line, neuron, core) in pairs {
        if assignment[neuron] != usize::MAX {
            return Err(Error::parse(path, line, format!("neuron {neuron} assigned twice")));
        }
        assignment[neuron] = core;
    }
    if let Some(missing) = assignment.iter().position(|&c| c == usize::MAX) {
        return Err(Error::parse(path, 0, format!("neuron {missing} has no core")));
    }
    Ok(assignment)
}

pub fn read_mapping(path: &Path) -> Result<Vec<usize>> {
    parse_mapping(&read_text(path)?, &display(path))
}

pub fn write_mapping(path: &Path, assignment: &[usize]) -> Result<()> {
    atomic_write(path, mapping_to_text(assignment).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::gaussian_blobs;
    use crate::presets::{desk_cnn, desk_mlp};
    use crate::training::init_weights;

    #[test]
    fn dataset_text_and_binary_round_trip() {
        let d = gaussian_blobs(12, 3, 2, 0.1, 4);
        assert_eq!(parse_dataset_text(&dataset_to_text(&d), "x").unwrap(), d);
        assert_eq!(parse_dataset_binary(&dataset_to_binary(&d), "x").unwrap(), d);
    }

    #[test]
    fn dataset_errors_name_line() {
        let text = "# n_features=2 n_classes=2 range=0,1\n0, 0.1, 0.2\n1, 0.3\n";
        match parse_dataset_text(text, "d.txt") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let bad_range = "# n_features=1 n_classes=2 range=0,1\n0, 1.5\n";
        assert!(parse_dataset_text(bad_range, "d").is_err());
        let mut bin = dataset_to_binary(&gaussian_blobs(3, 2, 2, 0.1, 0));
        bin.pop();
        assert!(parse_dataset_binary(&bin, "d").is_err());
    }

    #[test]
    fn network_round_trip_is_byte_identical() {
        for mut net in [
            desk_mlp(5, 3, 7, NeuronParams::default()).unwrap(),
            desk_cnn(4, 9, NeuronParams::new(0.75, 0.3).unwrap().with_hard_reset(-0.1)).unwrap(),
        ] {
            init_weights(&mut net, 1.7, 11);
            let text = network_to_text(&net);
            let back = parse_network(&text, "n").unwrap();
            assert_eq!(back, net);
            assert_eq!(network_to_text(&back), text);
        }
    }

    #[test]
    fn network_parse_error_names_section() {
        let net = desk_mlp(2, 2, 3, NeuronParams::default()).unwrap();
        let text = network_to_text(&net).replace("beta = 0.9", "beta = fast");
        let err = parse_network(&text, "n").unwrap_err().to_string();
        assert!(err.contains("[layer 0]"), "{err}");
        let text = network_to_text(&net).replace("[weights 1]", "[weights 9]");
        let err = parse_network(&text, "n").unwrap_err().to_string();
        assert!(err.contains("[weights 1]"), "{err}");
        assert!(parse_network("hello", "n").is_err());
    }

    #[test]
    fn spikes_and_mapping_round_trip() {
        let mut t = SpikeTrain::new(4, 3);
        t.set(0, 3, true);
        t.set(2, 1, true);
        assert_eq!(parse_spikes(&spikes_to_text(&t), "s").unwrap(), t);
        assert!(parse_spikes("# neurons=2 timesteps=2\n5 0\n", "s").is_err());
        let a = vec![0, 2, 1, 1];
        assert_eq!(parse_mapping(&mapping_to_text(&a), "m").unwrap(), a);
        assert!(parse_mapping("0 1\n2 1\n", "m").is_err());
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.txt");
        atomic_write(&p, b"one").unwrap();
        atomic_write(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
