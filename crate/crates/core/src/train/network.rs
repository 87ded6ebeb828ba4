use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{LayerSpec, NetworkConfig, OperatorKind};
use crate::dual::{build_dual, DualGraph};
use crate::error::{Error, Result};
use crate::features::{self, assemble_features, FeatureKind};
use crate::geom;
use crate::mesh::Mesh;
use crate::nn::{
    dual2primal, dual2primal_backward, Dropout, Dual2PrimalOp, DualConv, DualConvParams, Elu,
    Linear, MeanConv, Param, Tensor,
};

/// Everything a forward pass needs for one mesh, computed once up front.
#[derive(Clone, Debug)]
pub struct PreparedMesh {
    /// Per-node input channels: faces for dual operators, vertices for the
    /// primal control.
    pub node_input: Tensor,
    /// N_F x 3 dihedral angles per neighbor slot, when selected.
    pub slot_input: Option<Tensor>,
    pub dual: Option<DualGraph>,
    pub d2p: Option<Dual2PrimalOp>,
    pub adjacency: Option<Vec<Vec<usize>>>,
    pub vertex_count: usize,
}

/// Builds the network input for `mesh` under `config`'s operator and features.
pub fn prepare(mesh: &Mesh, config: &NetworkConfig) -> Result<PreparedMesh> {
    let (mut node_input, slot_input, dual, d2p, adjacency) = if config.operator.is_dual() {
        let dual = build_dual(mesh)?;
        let input = assemble_features(mesh, &dual, &config.features)?;
        let d2p = Dual2PrimalOp::new(mesh)?;
        (input.per_face, input.per_slot, Some(dual), Some(d2p), None)
    } else {
        let x = vertex_features(mesh, &config.features)?;
        (x, None, None, None, Some(mesh.vertex_neighbors()))
    };
    if config.normalize_features {
        features::standardize(&mut node_input);
    }
    Ok(PreparedMesh {
        node_input,
        slot_input,
        dual,
        d2p,
        adjacency,
        vertex_count: mesh.vertex_count(),
    })
}

/// Per-vertex analogues of the face channels, for the primal control:
/// position, area-weighted normal, one third of the incident area, and the
/// distance to the surface center of mass.
pub fn vertex_features(mesh: &Mesh, selection: &features::FeatureSelection) -> Result<Tensor> {
    let n = mesh.vertex_count();
    let mut normals = vec![[0.0; 3]; n];
    let mut areas = vec![0.0; n];
    for (f, face) in mesh.faces().iter().enumerate() {
        let c = mesh.face_cross(f);
        for &v in face {
            normals[v] = geom::add(normals[v], c);
            areas[v] += geom::norm(c) / 6.0;
        }
    }
    let center = features::surface_center_of_mass(mesh);
    let mut out = Tensor::zeros(n, selection.face_width());
    for v in 0..n {
        let row = out.row_mut(v);
        let mut c = 0;
        for kind in selection.kinds() {
            match kind {
                FeatureKind::Xyz => {
                    row[c..c + 3].copy_from_slice(&mesh.vertices()[v]);
                    c += 3;
                }
                FeatureKind::Normal => {
                    let nv = geom::normalize(normals[v]).ok_or(Error::IsolatedVertex(v))?;
                    row[c..c + 3].copy_from_slice(&nv);
                    c += 3;
                }
                FeatureKind::Area => {
                    row[c] = areas[v];
                    c += 1;
                }
                FeatureKind::DistCm => {
                    row[c] = geom::dist(mesh.vertices()[v], center);
                    c += 1;
                }
                FeatureKind::Dihedral => {
                    return Err(Error::Config("dihedral features need a dual operator".into()))
                }
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
#[allow(clippy::large_enum_variant)]
enum Layer {
    Linear(Linear),
    Conv(DualConv),
    Mean(MeanConv),
    Elu(Elu),
    Dropout(Dropout),
    Dual2Primal,
}

/// The assembled layer stack. The first compute layer reads the per-node
/// input; with Dihedral selected, a slot-fed dual convolution of the same
/// width is added to its output.
#[derive(Clone, Debug)]
pub struct Network {
    config: NetworkConfig,
    layers: Vec<Layer>,
    slot: Option<DualConv>,
    rng: ChaCha8Rng,
}

pub fn build_network(config: &NetworkConfig) -> Result<Network> {
    Network::new(config.clone())
}

impl Network {
    pub fn new(config: NetworkConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let kind = config.operator.dual_kind();
        let mut width = config.features.face_width();
        let mut layers = Vec::new();
        let mut slot = None;
        let last = config.layers.len() - 1;
        for (i, spec) in config.layers.iter().enumerate() {
            let compute = match *spec {
                LayerSpec::Linear(k) => {
                    let l = Linear::init(width, k, config.bias, &mut rng);
                    width = k;
                    Some(Layer::Linear(l))
                }
                LayerSpec::Output => {
                    let l = Linear::init(width, config.n_targets, config.bias, &mut rng);
                    width = config.n_targets;
                    Some(Layer::Linear(l))
                }
                LayerSpec::Conv(k) => {
                    let l = match kind {
                        Some(kind) => Layer::Conv(DualConv::new(
                            kind,
                            DualConvParams::init(width, k, config.bias, &mut rng),
                        )),
                        None => Layer::Mean(MeanConv::init(width, k, config.bias, &mut rng)),
                    };
                    width = k;
                    Some(l)
                }
                LayerSpec::Dual2Primal => {
                    layers.push(Layer::Dual2Primal);
                    None
                }
                LayerSpec::Dropout => {
                    layers.push(Layer::Dropout(Dropout::new(config.dropout)?));
                    None
                }
            };
            if let Some(layer) = compute {
                layers.push(layer);
                if i == 0 && config.features.has_dihedral() {
                    let kind = kind.expect("validated: dihedral needs a dual operator");
                    slot = Some(DualConv::new(
                        kind,
                        DualConvParams::init(config.features.slot_width(), width, config.bias, &mut rng),
                    ));
                }
                if i != last {
                    layers.push(Layer::Elu(Elu::default()));
                }
            }
        }
        Ok(Self {
            config,
            layers,
            slot,
            rng,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn operator(&self) -> OperatorKind {
        self.config.operator
    }

    /// Fails with `FeatureMismatch` unless `requested` equals the trained selection.
    pub fn check_features(&self, requested: &features::FeatureSelection) -> Result<()> {
        if *requested != self.config.features {
            return Err(Error::FeatureMismatch {
                trained: self.config.features.to_string(),
                requested: requested.to_string(),
            });
        }
        Ok(())
    }

    /// Logits on primal vertices (N_V x N_T).
    pub fn forward(&mut self, x: &PreparedMesh, train: bool) -> Result<Tensor> {
        let mut h = x.node_input.clone();
        let mut first = true;
        for (i, layer) in self.layers.iter_mut().enumerate() {
            h = match layer {
                Layer::Linear(l) => l.forward(&h)?,
                Layer::Conv(c) => {
                    let dual = x
                        .dual
                        .as_ref()
                        .ok_or_else(|| Error::ShapeMismatch("dual conv on a primal input".into()))?;
                    c.forward(&h, dual)?
                }
                Layer::Mean(m) => {
                    let adj = x
                        .adjacency
                        .as_ref()
                        .ok_or_else(|| Error::ShapeMismatch("mean conv on a dual input".into()))?;
                    m.forward(&h, adj)?
                }
                Layer::Elu(e) => e.forward(&h),
                Layer::Dropout(d) => d.forward(&h, train, &mut self.rng),
                Layer::Dual2Primal => match &x.d2p {
                    Some(op) => dual2primal(&h, op)?,
                    None => h,
                },
            };
            if first && !matches!(layer, Layer::Elu(_)) {
                first = false;
                if let Some(slot) = &mut self.slot {
                    let s = x
                        .slot_input
                        .as_ref()
                        .ok_or_else(|| Error::ShapeMismatch("missing dihedral input".into()))?;
                    h.add_assign(&slot.forward_slots(s)?);
                }
            }
            h.check_finite(&format!("layer {i}"))?;
        }
        if h.rows() != x.vertex_count {
            return Err(Error::ShapeMismatch(format!(
                "network produced {} rows for {} vertices",
                h.rows(),
                x.vertex_count
            )));
        }
        Ok(h)
    }

    /// Backpropagates `d_logits`, accumulating parameter gradients.
    pub fn backward(&mut self, d_logits: &Tensor, x: &PreparedMesh) -> Result<()> {
        let mut g = d_logits.clone();
        let n = self.layers.len();
        for i in (0..n).rev() {
            if i == 0 {
                if let Some(slot) = &mut self.slot {
                    slot.backward(&g)?;
                }
            }
            g = match &mut self.layers[i] {
                Layer::Linear(l) => l.backward(&g)?,
                Layer::Conv(c) => c.backward(&g)?,
                Layer::Mean(m) => m.backward(&g, x.adjacency.as_deref().unwrap_or(&[]))?,
                Layer::Elu(e) => e.backward(&g)?,
                Layer::Dropout(d) => d.backward(&g),
                Layer::Dual2Primal => match &x.d2p {
                    Some(op) => dual2primal_backward(&g, op)?,
                    None => g,
                },
            };
        }
        Ok(())
    }

    /// Parameters in a fixed order, with stable names.
    pub fn named_params_mut(&mut self) -> Vec<(String, &mut Param)> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter_mut().enumerate() {
            // linear layers own (w, b); convolutions own (u, w, b)
            let (ps, names): (Vec<&mut Param>, &[&str]) = match layer {
                Layer::Linear(l) => (l.params_mut(), &["w", "b"]),
                Layer::Conv(c) => (c.params_mut(), &["u", "w", "b"]),
                Layer::Mean(m) => (m.params_mut(), &["u", "w", "b"]),
                _ => continue,
            };
            for (p, name) in ps.into_iter().zip(names) {
                out.push((format!("l{i}.{name}"), p));
            }
        }
        if let Some(slot) = &mut self.slot {
            for (p, name) in slot.params_mut().into_iter().zip(["u", "w", "b"]) {
                out.push((format!("slot.{name}"), p));
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        self.named_params_mut().into_iter().map(|(_, p)| p).collect()
    }

    pub fn named_params(&self) -> Vec<(String, Param)> {
        let mut clone = self.clone();
        clone
            .named_params_mut()
            .into_iter()
            .map(|(n, p)| (n, p.clone()))
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.named_params().iter().map(|(_, p)| p.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    /// Every parameter value set to zero; used to build degenerate fixtures.
    pub fn zero_params(&mut self) {
        for p in self.params_mut() {
            p.value.fill(0.0);
        }
    }
}
