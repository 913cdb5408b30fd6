//! Coarse-to-fine proposal over one new child of a partial scene.
//!
//! The contact support of every (object, face) branch is partitioned by the
//! schedule's stages. At each stage the current cell is split, every piece is
//! scored by the unnormalized target at its center, and one piece is drawn
//! with probability proportional to its score. The final cell is sampled
//! uniformly, so the proposal has the closed-form density
//! `Π_t P_t(chosen) / measure(final cell)`.

use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, DepthImage, Pose};
use crate::likelihood::{visible_volume, KernelSums, LikelihoodMode, NoiseParams, Prefactor, WindowedScorer};
use crate::render::{rasterize_mesh, render_meshes};
use crate::scene::{Axis, Child, ContactParams, Face, ObjectModel, ScenePrior, Table};
use crate::Scalar;

use super::schedule::{NoiseGrid, Schedule};

/// Part of one contact axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Span {
    /// `[lo, hi]` of a continuous axis.
    Interval { lo: f64, hi: f64 },
    /// Lattice indices `start..end`.
    Indices { start: usize, end: usize },
}

impl Span {
    fn full(axis: &Axis) -> Self {
        match *axis {
            Axis::Interval { lo, hi } => Span::Interval { lo, hi },
            Axis::Lattice { count, .. } => Span::Indices { start: 0, end: count },
        }
    }

    /// Length or number of lattice values.
    pub fn measure(&self) -> f64 {
        match *self {
            Span::Interval { lo, hi } => hi - lo,
            Span::Indices { start, end } => (end - start) as f64,
        }
    }

    fn pieces(&self, n: usize) -> usize {
        match *self {
            Span::Interval { .. } => n,
            Span::Indices { start, end } => n.min(end - start),
        }
    }

    fn piece(&self, n: usize, i: usize) -> Span {
        match *self {
            Span::Interval { lo, hi } => {
                let at = |j: usize| if j == n { hi } else { lo + (hi - lo) * (j as f64 / n as f64) };
                Span::Interval { lo: at(i), hi: at(i + 1) }
            }
            Span::Indices { start, end } => {
                let m = self.pieces(n);
                let len = end - start;
                Span::Indices { start: start + i * len / m, end: start + (i + 1) * len / m }
            }
        }
    }

    /// Which of the `n` pieces holds `x`.
    fn locate(&self, n: usize, axis: &Axis, x: f64) -> Option<usize> {
        match *self {
            Span::Interval { lo, hi } => {
                if !(x >= lo && x <= hi) {
                    return None;
                }
                let i = (((x - lo) / (hi - lo)) * n as f64).floor();
                Some((i.max(0.0) as usize).min(n - 1))
            }
            Span::Indices { start, end } => {
                let idx = axis.lattice_index(x)?;
                if idx < start || idx >= end {
                    return None;
                }
                (0..self.pieces(n)).find(|&i| match self.piece(n, i) {
                    Span::Indices { start, end } => idx >= start && idx < end,
                    Span::Interval { .. } => false,
                })
            }
        }
    }

    fn center(&self, axis: &Axis) -> f64 {
        match *self {
            Span::Interval { lo, hi } => 0.5 * (lo + hi),
            Span::Indices { start, end } => axis.lattice_value(start + (end - start - 1) / 2),
        }
    }

    fn sample<R: Rng + ?Sized>(&self, axis: &Axis, rng: &mut R) -> f64 {
        match *self {
            Span::Interval { lo, hi } => lo + (hi - lo) * rng.gen::<f64>(),
            Span::Indices { start, end } => axis.lattice_value(rng.gen_range(start..end)),
        }
    }
}

/// A region of one branch's contact support, with a noise setting.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cell {
    pub branch: usize,
    pub noise: usize,
    pub spans: [Span; 3],
}

impl Cell {
    pub fn measure(&self) -> f64 {
        self.spans.iter().map(Span::measure).product()
    }

    /// Row-major split over `(dx, dy, dtheta)`.
    pub fn subdivide(&self, n: [usize; 3]) -> Vec<Cell> {
        let m = [0, 1, 2].map(|a| self.spans[a].pieces(n[a]));
        let mut out = Vec::with_capacity(m.iter().product());
        for i in 0..m[0] {
            for j in 0..m[1] {
                for k in 0..m[2] {
                    out.push(Cell {
                        spans: [self.spans[0].piece(n[0], i), self.spans[1].piece(n[1], j), self.spans[2].piece(n[2], k)],
                        ..*self
                    });
                }
            }
        }
        out
    }

    /// Index into [`subdivide`](Self::subdivide) of the piece holding `x`.
    pub fn locate(&self, n: [usize; 3], axes: &[Axis; 3], x: [f64; 3]) -> Option<usize> {
        let m = [0, 1, 2].map(|a| self.spans[a].pieces(n[a]));
        let i = self.spans[0].locate(n[0], &axes[0], x[0])?;
        let j = self.spans[1].locate(n[1], &axes[1], x[1])?;
        let k = self.spans[2].locate(n[2], &axes[2], x[2])?;
        Some((i * m[1] + j) * m[2] + k)
    }
}

/// An (object, face) pair with non-empty placement support.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Branch {
    pub object: usize,
    pub face: Face,
    pub axes: [Axis; 3],
}

impl Branch {
    pub fn root(&self, branch: usize, noise: usize) -> Cell {
        Cell { branch, noise, spans: self.axes.map(|a| Span::full(&a)) }
    }
}

/// Everything needed to parse one observation: the known camera and fixed
/// scene elements, the object library and its prior, and the likelihood.
#[derive(Clone, Debug)]
pub struct SceneProblem<T: Scalar> {
    pub observed: DepthImage<T>,
    pub camera: Pose<T>,
    pub intrinsics: CameraIntrinsics<T>,
    pub table: Arc<Table<T>>,
    pub library: Vec<Arc<ObjectModel<T>>>,
    /// Known objects (e.g. occluders) rendered with every hypothesis but not
    /// inferred and not scored by the prior.
    pub fixed: Vec<Child<T>>,
    pub prior: ScenePrior,
    pub sigma_max: T,
    pub likelihood: LikelihoodMode,
    pub prefactor: Prefactor,
}

/// Unnormalized posterior `prior(children) · likelihood(observed | scene)`
/// for a fixed problem and noise grid.
pub struct Target<'a, T: Scalar> {
    problem: &'a SceneProblem<T>,
    grid: &'a NoiseGrid,
    scorer: WindowedScorer<T>,
    sigma_of: Vec<usize>,
    world_to_camera: Pose<T>,
    base: DepthImage<T>,
    branches: Vec<Branch>,
}

impl<'a, T: Scalar> Target<'a, T> {
    pub fn new(problem: &'a SceneProblem<T>, grid: &'a NoiseGrid) -> Result<Self> {
        let k = &problem.intrinsics;
        k.validate()?;
        problem.prior.domain.validate()?;
        grid.validate(problem.sigma_max.as_f64())?;
        if problem.library.is_empty() {
            return Err(Error::EmptyLibrary);
        }
        let (sigmas, sigma_of) = grid.sigma_table();
        let window = match problem.likelihood {
            LikelihoodMode::Full => k.width.max(k.height),
            LikelihoodMode::Windowed { radius } => radius,
        };
        let sigmas: Vec<T> = sigmas.into_iter().map(T::lit).collect();
        let scorer = WindowedScorer::new(
            &problem.observed,
            k,
            &sigmas,
            window,
            visible_volume(k),
            problem.sigma_max,
            problem.prefactor,
        )?;
        let mut meshes = vec![(&problem.table.mesh, Pose::identity())];
        for c in &problem.fixed {
            meshes.push((&c.object.mesh, c.world_pose(&problem.table)?));
        }
        let base = render_meshes(&meshes, &problem.camera, k);
        let mut branches = Vec::new();
        for (object, model) in problem.library.iter().enumerate() {
            for &face in &problem.prior.domain.faces {
                if let Some(axes) = problem.prior.domain.axes(&problem.table, model, face) {
                    branches.push(Branch { object, face, axes });
                }
            }
        }
        if branches.is_empty() {
            return Err(Error::EmptySupport);
        }
        Ok(Self { problem, grid, scorer, sigma_of, world_to_camera: problem.camera.inverse(), base, branches })
    }

    pub fn problem(&self) -> &SceneProblem<T> {
        self.problem
    }

    pub fn noise_grid(&self) -> &NoiseGrid {
        self.grid
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn noise_params(&self, noise: usize) -> NoiseParams<T> {
        self.grid.params(noise)
    }

    pub fn child(&self, branch: usize, x: [f64; 3]) -> Child<T> {
        let b = &self.branches[branch];
        Child {
            object: Arc::clone(&self.problem.library[b.object]),
            face: b.face,
            contact: ContactParams::new(T::lit(x[0]), T::lit(x[1]), T::lit(x[2])),
        }
    }

    fn branch_of(&self, child: &Child<T>) -> Option<usize> {
        let object = self.problem.library.iter().position(|o| Arc::ptr_eq(o, &child.object) || o.id == child.object.id)?;
        self.branches.iter().position(|b| b.object == object && b.face == child.face)
    }

    /// Log target of a full scene hypothesis with the given noise setting:
    /// scene prior, uniform prior over the noise grid, and likelihood.
    pub fn log_target(&self, children: &[Child<T>], noise: usize) -> Result<f64> {
        let group = Group::new(self, children.to_vec(), &[self.sigma_of[noise]])?;
        Ok(group.finish(None, noise).log_target)
    }

    /// Log target of `children` under every noise setting, from one render.
    pub fn log_targets(&self, children: &[Child<T>]) -> Result<Vec<f64>> {
        let group = Group::new(self, children.to_vec(), &self.all_sigmas())?;
        Ok((0..self.grid.len()).map(|n| group.finish(None, n).log_target).collect())
    }

    /// Normalized scores of `cells` as extensions of `partial`: a softmax of
    /// the log target at each cell center. All-zero scores become uniform.
    pub fn score_cells(&self, partial: &[Child<T>], cells: &[Cell]) -> Result<Vec<f64>> {
        if cells.is_empty() {
            return Err(Error::EmptySupport);
        }
        let group = Group::new(self, partial.to_vec(), &self.all_sigmas())?;
        let logs: Vec<f64> = cells.par_iter().map(|c| group.eval_center(c, &[c.noise])[0]).collect();
        Ok(softmax(&logs))
    }

    /// Draws a new child for `partial` together with a noise setting.
    pub fn propose<R: Rng + ?Sized>(&self, partial: &[Child<T>], schedule: &Schedule, rng: &mut R) -> Result<Proposal<T>> {
        schedule.validate()?;
        let mut group = Group::new(self, partial.to_vec(), &self.all_sigmas())?;
        group.propose(schedule, rng)
    }

    /// Log density of proposing `child` with `noise` as an extension of
    /// `partial`; `-inf` outside the proposal's support.
    pub fn proposal_log_density(&self, partial: &[Child<T>], schedule: &Schedule, child: &Child<T>, noise: usize) -> Result<f64> {
        schedule.validate()?;
        let mut group = Group::new(self, partial.to_vec(), &self.all_sigmas())?;
        Ok(group.log_density(schedule, child, noise))
    }

    /// Probability of each (branch, noise) pair under the first stage.
    pub fn discrete_probabilities(&self, partial: &[Child<T>], schedule: &Schedule) -> Result<Vec<Vec<f64>>> {
        schedule.validate()?;
        let nb = self.branches.len();
        let nn = self.grid.len();
        let stage = schedule.stages[0];
        if !stage.enumerate_discrete {
            return Ok(vec![vec![1.0 / (nb * nn) as f64; nn]; nb]);
        }
        let mut group = Group::new(self, partial.to_vec(), &self.all_sigmas())?;
        let (cells, probs) = group.stage0(stage.subdivisions, None);
        let mut out = vec![vec![0.0; nn]; nb];
        for (c, p) in cells.iter().zip(probs.iter()) {
            out[c.branch][c.noise] += p;
        }
        Ok(out)
    }

    fn all_sigmas(&self) -> Vec<usize> {
        (0..self.scorer.sigmas().len()).collect()
    }

    pub(crate) fn sigma_index(&self, noise: usize) -> usize {
        self.sigma_of[noise]
    }
}

/// A proposed extension.
#[derive(Clone, Debug)]
pub struct Proposal<T: Scalar> {
    pub child: Child<T>,
    pub noise: usize,
    pub log_q: f64,
    /// Log target of the extended scene with the proposed noise.
    pub log_target: f64,
}

fn softmax(logs: &[f64]) -> Vec<f64> {
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return vec![1.0 / logs.len() as f64; logs.len()];
    }
    let w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

fn draw_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u = rng.gen::<f64>();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// Identifies a list of scored cells: the stage-0 root choice and the path
/// of chosen indices below it.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct CellKey {
    root: Option<(usize, usize)>,
    path: Vec<u32>,
}

/// Extensions of one partial scene, with its render and kernel sums cached.
pub(crate) struct Group<'t, 'a, T: Scalar> {
    target: &'t Target<'a, T>,
    children: Vec<Child<T>>,
    render: DepthImage<T>,
    sums: KernelSums<T>,
    log_prior: f64,
    cache: HashMap<CellKey, Arc<Vec<f64>>>,
}

/// Log target and proposal bookkeeping for a finished extension.
pub(crate) struct Finished {
    pub log_target: f64,
}

impl<'t, 'a, T: Scalar> Group<'t, 'a, T> {
    pub(crate) fn new(target: &'t Target<'a, T>, children: Vec<Child<T>>, sigmas: &[usize]) -> Result<Self> {
        let p = target.problem;
        let mut render = target.base.clone();
        let mut log_prior = 0.0;
        for c in &children {
            log_prior += p.prior.child_log_density(&p.table, c);
            let pose = target.world_to_camera.compose(&c.world_pose(&p.table)?);
            rasterize_mesh(&mut render, &c.object.mesh, &pose, &p.intrinsics);
        }
        let sums = target.scorer.kernel_sums(&render, sigmas)?;
        Ok(Self { target, children, render, sums, log_prior, cache: HashMap::new() })
    }

    pub(crate) fn children(&self) -> &[Child<T>] {
        &self.children
    }

    /// Log target of this partial scene extended by `extra` (or not at all).
    pub(crate) fn finish(&self, extra: Option<&Child<T>>, noise: usize) -> Finished {
        let s = self.target.sigma_of[noise];
        let np = self.target.noise_params(noise);
        let Some(child) = extra else {
            return Finished { log_target: self.score(&self.sums, s, np, self.log_prior) };
        };
        let p = self.target.problem;
        let prior = self.log_prior + p.prior.child_log_density(&p.table, child);
        if prior == f64::NEG_INFINITY {
            return Finished { log_target: f64::NEG_INFINITY };
        }
        match self.extended_sums(child, &[s]) {
            Some(sums) => Finished { log_target: self.score(&sums, s, np, prior) },
            None => Finished { log_target: f64::NEG_INFINITY },
        }
    }

    fn score(&self, sums: &KernelSums<T>, s: usize, np: NoiseParams<T>, prior: f64) -> f64 {
        if prior == f64::NEG_INFINITY {
            return prior;
        }
        // Uniform prior over the noise grid.
        let noise_prior = -(self.target.grid.len() as f64).ln();
        match self.target.scorer.log_likelihood(sums, s, np.p_outlier) {
            Ok(l) => prior + noise_prior + l.as_f64(),
            Err(_) => f64::NEG_INFINITY,
        }
    }

    fn extended_sums(&self, child: &Child<T>, sigmas: &[usize]) -> Option<KernelSums<T>> {
        let p = self.target.problem;
        let pose = self.target.world_to_camera.compose(&child.world_pose(&p.table).ok()?);
        let mut img = self.render.clone();
        let rect = rasterize_mesh(&mut img, &child.object.mesh, &pose, &p.intrinsics);
        self.target.scorer.update_kernel_sums(&self.sums, &img, rect, sigmas).ok()
    }

    /// Log targets at the center of `cell` for each noise setting in `noises`.
    fn eval_center(&self, cell: &Cell, noises: &[usize]) -> Vec<f64> {
        let t = self.target;
        let b = &t.branches[cell.branch];
        let x = [0, 1, 2].map(|a| cell.spans[a].center(&b.axes[a]));
        let child = t.child(cell.branch, x);
        let p = t.problem;
        let prior = self.log_prior + p.prior.child_log_density(&p.table, &child);
        if prior == f64::NEG_INFINITY {
            return vec![f64::NEG_INFINITY; noises.len()];
        }
        let mut sigmas: Vec<usize> = noises.iter().map(|&n| t.sigma_of[n]).collect();
        sigmas.sort_unstable();
        sigmas.dedup();
        let Some(sums) = self.extended_sums(&child, &sigmas) else {
            return vec![f64::NEG_INFINITY; noises.len()];
        };
        noises
            .iter()
            .map(|&n| self.score(&sums, t.sigma_of[n], t.noise_params(n), prior))
            .collect()
    }

    /// Stage-0 cells and their probabilities. `root` restricts to one
    /// (branch, noise) pair; otherwise every pair is enumerated.
    fn stage0(&mut self, n: [usize; 3], root: Option<(usize, usize)>) -> (Vec<Cell>, Arc<Vec<f64>>) {
        let t = self.target;
        let nn = t.grid.len();
        let mut geometry = Vec::new();
        let roots: Vec<(usize, usize)> = match root {
            Some(r) => vec![r],
            None => (0..t.branches.len()).map(|b| (b, 0)).collect(),
        };
        for &(b, noise) in &roots {
            geometry.extend(t.branches[b].root(b, noise).subdivide(n));
        }
        let noises: Vec<usize> = match root {
            Some((_, noise)) => vec![noise],
            None => (0..nn).collect(),
        };
        let cells: Vec<Cell> = geometry
            .iter()
            .flat_map(|g| noises.iter().map(move |&noise| Cell { noise, ..*g }))
            .collect();
        let key = CellKey { root, path: Vec::new() };
        if let Some(p) = self.cache.get(&key) {
            return (cells, Arc::clone(p));
        }
        let logs: Vec<f64> = geometry.par_iter().flat_map_iter(|g| self.eval_center(g, &noises)).collect();
        let probs = Arc::new(softmax(&logs));
        self.cache.insert(key, Arc::clone(&probs));
        (cells, probs)
    }

    fn refine(&mut self, key: CellKey, cell: &Cell, n: [usize; 3]) -> (Vec<Cell>, Arc<Vec<f64>>) {
        let cells = cell.subdivide(n);
        if let Some(p) = self.cache.get(&key) {
            return (cells, Arc::clone(p));
        }
        let logs: Vec<f64> = cells.par_iter().map(|c| self.eval_center(c, &[c.noise])[0]).collect();
        let probs = Arc::new(softmax(&logs));
        self.cache.insert(key, Arc::clone(&probs));
        (cells, probs)
    }

    fn root_choice<R: Rng + ?Sized>(&self, schedule: &Schedule, rng: &mut R) -> (Option<(usize, usize)>, f64) {
        if schedule.stages[0].enumerate_discrete {
            return (None, 0.0);
        }
        let nb = self.target.branches.len();
        let nn = self.target.grid.len();
        let b = rng.gen_range(0..nb);
        let noise = rng.gen_range(0..nn);
        (Some((b, noise)), -((nb * nn) as f64).ln())
    }

    pub(crate) fn propose<R: Rng + ?Sized>(&mut self, schedule: &Schedule, rng: &mut R) -> Result<Proposal<T>> {
        let (root, mut log_q) = self.root_choice(schedule, rng);
        let (cells, probs) = self.stage0(schedule.stages[0].subdivisions, root);
        let i = draw_index(&probs, rng);
        log_q += probs[i].ln();
        let mut cell = cells[i];
        let mut key = CellKey { root, path: vec![i as u32] };
        for stage in &schedule.stages[1..] {
            let (cells, probs) = self.refine(key.clone(), &cell, stage.subdivisions);
            let j = draw_index(&probs, rng);
            log_q += probs[j].ln();
            cell = cells[j];
            key.path.push(j as u32);
        }
        let b = self.target.branches[cell.branch];
        let x = [0, 1, 2].map(|a| cell.spans[a].sample(&b.axes[a], rng));
        log_q -= cell.measure().ln();
        let child = self.target.child(cell.branch, x);
        let log_target = self.finish(Some(&child), cell.noise).log_target;
        Ok(Proposal { child, noise: cell.noise, log_q, log_target })
    }

    pub(crate) fn log_density(&mut self, schedule: &Schedule, child: &Child<T>, noise: usize) -> f64 {
        let t = self.target;
        let Some(branch) = t.branch_of(child) else {
            return f64::NEG_INFINITY;
        };
        if noise >= t.grid.len() {
            return f64::NEG_INFINITY;
        }
        let axes = t.branches[branch].axes;
        let c = &child.contact;
        let x = [c.dx.as_f64(), c.dy.as_f64(), c.dtheta.as_f64()];
        let stage0 = schedule.stages[0];
        let (root, mut log_q) = if stage0.enumerate_discrete {
            (None, 0.0)
        } else {
            (Some((branch, noise)), -((t.branches.len() * t.grid.len()) as f64).ln())
        };
        let Some(g) = t.branches[branch].root(branch, noise).locate(stage0.subdivisions, &axes, x) else {
            return f64::NEG_INFINITY;
        };
        let i = match root {
            Some(_) => g,
            None => {
                let per_branch: usize = stage0_pieces(&t.branches[..branch], stage0.subdivisions);
                (per_branch + g) * t.grid.len() + noise
            }
        };
        let (cells, probs) = self.stage0(stage0.subdivisions, root);
        log_q += probs[i].ln();
        let mut cell = cells[i];
        let mut key = CellKey { root, path: vec![i as u32] };
        for stage in &schedule.stages[1..] {
            let Some(j) = cell.locate(stage.subdivisions, &axes, x) else {
                return f64::NEG_INFINITY;
            };
            let (cells, probs) = self.refine(key.clone(), &cell, stage.subdivisions);
            log_q += probs[j].ln();
            cell = cells[j];
            key.path.push(j as u32);
        }
        log_q - cell.measure().ln()
    }
}

fn stage0_pieces(branches: &[Branch], n: [usize; 3]) -> usize {
    branches
        .iter()
        .map(|b| {
            let root = b.root(0, 0);
            (0..3).map(|a| root.spans[a].pieces(n[a])).product::<usize>()
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_handles_degenerate_inputs() {
        assert_eq!(softmax(&[3.0]), vec![1.0]);
        assert_eq!(softmax(&[f64::NEG_INFINITY; 4]), vec![0.25; 4]);
        let s = softmax(&[0.0, 0.0]);
        assert_eq!(s[0], s[1]);
        let t = [0.2f64, 0.5, 0.3];
        let s = softmax(&t.map(f64::ln));
        for (a, b) in s.iter().zip(t) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn draw_skips_zero_mass() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            assert_eq!(draw_index(&[0.0, 1.0, 0.0], &mut rng), 1);
        }
    }

    #[test]
    fn interval_pieces_tile_their_parent() {
        let s = Span::Interval { lo: 0.1, hi: 0.73 };
        let parts: Vec<Span> = (0..7).map(|i| s.piece(7, i)).collect();
        let total: f64 = parts.iter().map(Span::measure).sum();
        assert!((total - s.measure()).abs() < 1e-12);
        for w in parts.windows(2) {
            match (w[0], w[1]) {
                (Span::Interval { hi, .. }, Span::Interval { lo, .. }) => assert_eq!(hi, lo),
                _ => unreachable!(),
            }
        }
    }

    #[test]
    fn lattice_pieces_partition_indices() {
        let axis = Axis::Lattice { lo: 0.0, step: 0.5, count: 7 };
        let s = Span::full(&axis);
        let n = 3;
        let mut seen = Vec::new();
        for i in 0..s.pieces(n) {
            if let Span::Indices { start, end } = s.piece(n, i) {
                seen.extend(start..end);
            }
        }
        assert_eq!(seen, (0..7).collect::<Vec<_>>());
        assert_eq!(s.locate(n, &axis, 3.0), Some(2));
        assert_eq!(s.locate(n, &axis, 0.25), None);
        assert_eq!(s.pieces(10), 7);
    }

    #[test]
    fn cell_locate_matches_subdivide() {
        let axes = [
            Axis::Interval { lo: 0.0, hi: 1.0 },
            Axis::Lattice { lo: 0.0, step: 1.0, count: 5 },
            Axis::Interval { lo: 0.0, hi: 6.0 },
        ];
        let root = Cell { branch: 0, noise: 0, spans: axes.map(|a| Span::full(&a)) };
        let n = [3, 2, 4];
        let cells = root.subdivide(n);
        for (i, c) in cells.iter().enumerate() {
            let x = [0, 1, 2].map(|a| c.spans[a].center(&axes[a]));
            assert_eq!(root.locate(n, &axes, x), Some(i));
        }
        let total: f64 = cells.iter().map(Cell::measure).sum();
        assert!((total - root.measure()).abs() < 1e-12);
    }
}
