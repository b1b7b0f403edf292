"""
GANICE training and fitted models
A conditional generator g(w, u) trained against per-cell anchored critics
on the stratified, cell-normalized objective, with factual pretraining,
auxiliary factual losses, restarts and post-hoc calibration.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from config.experiment_config import GaniceConfig
from core import autodiff as ad
from core.autodiff import Tape, Var
from core.errors import ContractError, DataIOError, TrainingDivergedError
from core.nn import Activation, AdamState, MlpNet, adam_step, penalty_term
from dgp.dataset import Dataset, Split, StateEncoder, TargetDesign, TreatmentKind
from estimator.calibration import CalibrationTables, calibrate_quantiles
from estimator.cells import CellMap
from estimator.objectives import anchored
from monitoring.training_metrics import TrainingMonitor
from transport.laws import EmpiricalLaw, State
from transport.wasserstein import w1_arrays

logger = logging.getLogger(__name__)

SAMPLE_CHUNK_ROWS = 65_536
RESTART_SEED_STRIDE = 104_729
PROXY_DRAWS = 4


class ObjectiveKind(Enum):
    """Which adversarial objective the trainer optimizes."""
    STRATIFIED = "stratified"                        # per-cell critics, cell-normalized batches
    NO_CELL_NORMALIZATION = "no-cell-normalization"  # per-cell critics, global-batch sums
    POOLED = "pooled"                                # one critic on joint (state, outcome) pairs


def snap_zero_mass(draws: np.ndarray, arms: np.ndarray, fractions: Dict[int, float]) -> np.ndarray:
    """
    Set the draws closest to zero to exactly zero, per row, so each arm's
    zero fraction matches `fractions`. The snapped draws form an interval
    around zero, so the order of the remaining draws is unchanged.
    """
    draws = np.array(draws, dtype=float)
    n = draws.shape[1]
    for arm, fraction in fractions.items():
        rows = arms == arm
        k = int(round(fraction * n))
        if k == 0 or not rows.any():
            continue
        block = draws[rows]
        nearest = np.argsort(np.abs(block), axis=1, kind='stable')[:, :k]
        np.put_along_axis(block, nearest, 0.0, axis=1)
        draws[rows] = block
    return draws


@dataclass
class TrainedModel:
    """
    Fitted conditional generator nu_w = g(w, .)_# U with its critics.

    Sampling is deterministic given the state and the latent draws.
    """
    generator: MlpNet
    critics: Dict[int, MlpNet]
    cell_map: CellMap
    encoder: StateEncoder
    anchor: float
    bound: float
    latent_dim: int
    objective: ObjectiveKind = ObjectiveKind.STRATIFIED
    calibration: Optional[CalibrationTables] = None
    zero_fractions: Optional[Dict[int, float]] = None
    validation_proxy: Optional[float] = None
    monitor: TrainingMonitor = field(default_factory=TrainingMonitor)
    config: Dict[str, Any] = field(default_factory=dict)

    def push(self, X: np.ndarray, T: np.ndarray, latent: np.ndarray) -> np.ndarray:
        """g(w, u) with one latent row per state."""
        features = self.encoder.encode(X, T)
        return self.generator(np.hstack([features, np.asarray(latent, dtype=float)]))[:, 0]

    def sample_raw(self, X: np.ndarray, T: np.ndarray, n_draws: int, rng: np.random.Generator) -> np.ndarray:
        """(S, n_draws) generator draws without calibration or zero snapping."""
        features = self.encoder.encode(X, T)
        n_states = features.shape[0]
        out = np.empty((n_states, n_draws))
        per_chunk = max(1, SAMPLE_CHUNK_ROWS // max(n_draws, 1))
        for start in range(0, n_states, per_chunk):
            stop = min(n_states, start + per_chunk)
            rows = np.repeat(features[start:stop], n_draws, axis=0)
            latent = rng.random((rows.shape[0], self.latent_dim))
            out[start:stop] = self.generator(np.hstack([rows, latent]))[:, 0].reshape(stop - start, n_draws)
        return out

    def sample_states(self, X: np.ndarray, T: np.ndarray, n_draws: int, rng: np.random.Generator) -> np.ndarray:
        draws = self.sample_raw(X, T, n_draws, rng)
        arms = self.encoder.arms(T)
        if self.calibration is not None:
            draws = self.calibration.apply(draws, arms)
        if self.zero_fractions:
            draws = snap_zero_mass(draws, arms, self.zero_fractions)
        return draws

    def sample(self, state: State, n_draws: int, seed: int) -> EmpiricalLaw:
        X, T = state.arrays()
        return EmpiricalLaw(self.sample_states(X, T, n_draws, np.random.default_rng(seed))[0])

    def critic_functions(self) -> Dict[int, Callable[[np.ndarray], np.ndarray]]:
        """Per-cell critics anchored at y0 as plain callables on outcome vectors."""
        if self.objective is ObjectiveKind.POOLED:
            raise ContractError("A pooled critic conditions on the state and has no per-cell form")
        return {cell: anchored(critic, self.anchor) for cell, critic in self.critics.items()}

    def save(self, directory: Union[str, Path]) -> Path:
        """Network JSON checkpoints, the cell map, model metadata and the training log."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        self.generator.save(directory / 'generator.json')
        for key, critic in self.critics.items():
            critic.save(directory / f'critic_{key}.json')
        (directory / 'cell_map.json').write_text(json.dumps(self.cell_map.to_dict()))
        meta = {
            'encoder': self.encoder.to_dict(),
            'anchor': self.anchor,
            'bound': self.bound,
            'latent_dim': self.latent_dim,
            'objective': self.objective.value,
            'critics': sorted(self.critics),
            'calibration': None if self.calibration is None else self.calibration.to_dict(),
            'zero_fractions': None if self.zero_fractions is None else {str(k): v for k, v in self.zero_fractions.items()},
            'validation_proxy': self.validation_proxy,
            'config': self.config,
        }
        (directory / 'model.json').write_text(json.dumps(meta, indent=2))
        self.monitor.to_csv(directory / 'training_log.csv')
        return directory

    @classmethod
    def load(cls, directory: Union[str, Path]) -> 'TrainedModel':
        directory = Path(directory)
        meta_path = directory / 'model.json'
        if not meta_path.exists():
            raise DataIOError(f"No model checkpoint at {directory} (missing model.json)")
        meta = json.loads(meta_path.read_text())
        monitor = TrainingMonitor()
        log_path = directory / 'training_log.csv'
        if log_path.exists():
            monitor.extend(pd.read_csv(log_path).to_dict('records'))
        calibration = meta.get('calibration')
        zero = meta.get('zero_fractions')
        return cls(
            generator=MlpNet.load(directory / 'generator.json'),
            critics={int(k): MlpNet.load(directory / f'critic_{k}.json') for k in meta['critics']},
            cell_map=CellMap.from_dict(json.loads((directory / 'cell_map.json').read_text())),
            encoder=StateEncoder.from_dict(meta['encoder']),
            anchor=float(meta['anchor']),
            bound=float(meta['bound']),
            latent_dim=int(meta['latent_dim']),
            objective=ObjectiveKind(meta['objective']),
            calibration=None if calibration is None else CalibrationTables.from_dict(calibration),
            zero_fractions=None if zero is None else {int(k): float(v) for k, v in zero.items()},
            validation_proxy=meta.get('validation_proxy'),
            monitor=monitor,
            config=meta.get('config', {}),
        )


def _crps_term(draws: Var, y: np.ndarray) -> Var:
    """Mean sample CRPS of each row of draws against y, distinct pairs for the spread."""
    b, k = draws.shape
    accuracy = ad.mean(ad.abs_(draws - y), axis=1)
    spread = ad.abs_(ad.reshape(draws, (b, k, 1)) - ad.reshape(draws, (b, 1, k)))
    return ad.mean(accuracy - ad.sum_(spread, axis=(1, 2)) * (0.5 / (k * (k - 1))))


class GaniceTrainer:
    """
    One training run.

    Pretrains the generator on factual MSE, then alternates `critic_steps`
    critic updates with one generator update. The training API takes no
    propensity scores or density ratios: target masses enter only through
    the cell masses q_C.
    """

    def __init__(
        self,
        config: GaniceConfig,
        dataset: Dataset,
        target_design: TargetDesign,
        objective: ObjectiveKind = ObjectiveKind.STRATIFIED,
        monitor: Optional[TrainingMonitor] = None,
    ):
        errors = config.validate()
        if errors:
            raise ContractError("Invalid GANICE configuration: " + "; ".join(errors))
        self.config = config
        self.dataset = dataset
        self.design = target_design
        self.objective = objective
        self.monitor = monitor or TrainingMonitor()
        init_seq, mass_seq, train_seq = np.random.SeedSequence(config.seed).spawn(3)
        self._init_rng = np.random.default_rng(init_seq)
        self._mass_rng = np.random.default_rng(mass_seq)
        self.rng = np.random.default_rng(train_seq)
        self._checkpoint: Optional[MlpNet] = None
        self._step = 0

    # setup

    def _check_arms(self, T_train: np.ndarray):
        encoder = self.dataset.encoder
        if encoder.kind is TreatmentKind.FINITE_STATE:
            return
        wanted = set(np.unique(encoder.arms(self.design.interventions)).tolist())
        present = set(np.unique(encoder.arms(T_train)).tolist())
        missing = sorted(wanted - present)
        if missing:
            raise ContractError(f"Empty training arm(s) {missing}: no observed units to learn from")

    def _setup(self):
        cfg = self.config
        X, T, y = self.dataset.arrays(Split.TRAIN)
        if y.size == 0:
            raise ContractError("Training split is empty")
        self._check_arms(T)
        encoder = self.dataset.encoder
        self.features = encoder.encode(X, T)
        self.y = y
        self.anchor = float(np.median(y))
        spread = float(np.std(y))
        self.scale = spread if spread > 0 else 1.0
        self.bound = max(1.1 * float(np.max(np.abs(y))), 1e-3)

        self.cell_map = CellMap.fit(cfg.cell_map, self.dataset)
        X_pool, T_pool = self.cell_map.build_masses(
            self.design, X, T, cfg.cell_map.min_cell_size, cfg.cell_map.mc_target_size, self._mass_rng
        )
        self.pool_features = encoder.encode(X_pool, T_pool)
        self.pool_p = self.design.grid()[2] if self.cell_map.discrete else None
        self.masses = self.cell_map.masses
        self.obs_cells = self.cell_map.cells(X, T)
        self.pool_cells = self.cell_map.cells(X_pool, T_pool)
        self.active = [int(c) for c in np.nonzero(self.masses > 0)[0]]
        self.obs_members = {c: np.nonzero(self.obs_cells == c)[0] for c in self.active}
        self.pool_members = {c: np.nonzero(self.pool_cells == c)[0] for c in self.active}
        for cell in self.active:
            if self.obs_members[cell].size == 0:
                logger.warning(f"Cell {cell} has target mass but no training outcomes; using the anchor y0")

        width = encoder.width(self.dataset.n_covariates)
        self.generator = MlpNet.initialize(
            [width + cfg.latent_dim, *cfg.generator_widths, 1], self._init_rng, Activation.RELU,
            output_bound=self.bound, output_shift=self.anchor, output_scale=self.scale,
        )
        if self.objective is ObjectiveKind.POOLED:
            keys = [0]
            critic_widths = [width + 1, *cfg.critic_widths, 1]
            critic_kwargs: Dict[str, float] = {}
        else:
            keys = self.active
            critic_widths = [1, *cfg.critic_widths, 1]
            critic_kwargs = {'input_shift': self.anchor, 'input_scale': self.scale}
        self.critics = {
            key: MlpNet.initialize(critic_widths, self._init_rng, Activation.TANH, **critic_kwargs) for key in keys
        }
        beta1, beta2 = cfg.betas
        self.critic_adam = {
            key: AdamState.create(critic.n_params, cfg.lr_critic, beta1, beta2) for key, critic in self.critics.items()
        }
        self.gen_adam = AdamState.create(self.generator.n_params, cfg.lr_generator, beta1, beta2)
        logger.info(
            f"GANICE setup: {self.y.size} training units, {len(self.active)} active cells, "
            f"objective={self.objective.value}",
            extra={'extra_data': {'anchor': self.anchor, 'bound': self.bound, 'seed': cfg.seed}},
        )

    def _generator_inputs(self, features: np.ndarray) -> np.ndarray:
        return np.hstack([features, self.rng.random((features.shape[0], self.config.latent_dim))])

    def _update_generator(self, adam: AdamState, tape: Tape, loss: Var, params: List[Var], phase: str) -> float:
        value = float(loss.value)
        if not math.isfinite(value):
            raise TrainingDivergedError(f"Non-finite {phase} loss", step=self._step, checkpoint=self._checkpoint)
        grads = MlpNet.flatten(tape.gradient(loss, params))
        try:
            self.generator.weights = adam_step(adam, self.generator.weights, grads)
        except TrainingDivergedError as exc:
            raise TrainingDivergedError(
                f"Non-finite {phase} gradient", step=self._step, checkpoint=self._checkpoint
            ) from exc
        return value

    # pretraining

    def _pretrain(self):
        cfg = self.config
        adam = AdamState.create(self.generator.n_params, cfg.lr_generator, *cfg.betas)
        for step in range(1, cfg.pretrain_steps + 1):
            self._step = step
            idx = self.rng.integers(0, self.y.size, cfg.batch_size)
            tape = Tape()
            params = self.generator.bind(tape)
            out = self.generator.apply(self._generator_inputs(self.features[idx]), params)
            loss = ad.mean(ad.square(out - self.y[idx].reshape(-1, 1)))
            value = self._update_generator(adam, tape, loss, params, 'pretrain')
            if step % cfg.log_every == 0 or step == cfg.pretrain_steps:
                self._checkpoint = self.generator.copy()
                self.monitor.record_step(step, 'pretrain', generator_loss=value)
                logger.debug(f"Pretrain step {step}: mse={value:.5f}")

    # critic updates

    def _interpolate(self, real: np.ndarray, fake: np.ndarray) -> np.ndarray:
        if len(real) == 0:
            return fake
        if len(fake) == 0:
            return real
        n = min(len(real), len(fake))
        eps = self.rng.random((n, 1))
        return eps * real[:n] + (1.0 - eps) * fake[:n]

    def _anchored_critic(self, critic: MlpNet) -> Callable[[Union[Var, np.ndarray], List[Var]], Var]:
        anchor_point = np.array([[self.anchor]])

        def evaluate(values: Union[Var, np.ndarray], params: List[Var]) -> Var:
            return critic.apply(values, params) - critic.apply(anchor_point, params)

        return evaluate

    def _critic_update(self, key: int, real: np.ndarray, fake: np.ndarray,
                       real_norm: float, fake_norm: float) -> Tuple[float, float, float]:
        """
        Ascend sum D(real)/real_norm - sum D(fake)/fake_norm minus the gradient
        penalty. Cell critics enter as D(y) - D(y0), so a constant offset
        cancels whatever the two normalizers are.
        """
        critic = self.critics[key]
        tape = Tape()
        params = critic.bind(tape)
        evaluate = critic.apply if self.objective is ObjectiveKind.POOLED else self._anchored_critic(critic)
        gap: Union[Var, float] = 0.0
        if len(real):
            gap = gap + ad.sum_(evaluate(real, params)) * (1.0 / real_norm)
        if len(fake):
            gap = gap - ad.sum_(evaluate(fake, params)) * (1.0 / fake_norm)
        gp = penalty_term(lambda v: critic.apply(v, params), self._interpolate(real, fake), tape)
        loss = gp * self.config.gp_weight - gap
        grads = MlpNet.flatten(tape.gradient(loss, params))
        try:
            critic.weights = adam_step(self.critic_adam[key], critic.weights, grads)
        except TrainingDivergedError as exc:
            raise TrainingDivergedError(
                f"Non-finite critic gradient in cell {key}", step=self._step, checkpoint=self._checkpoint
            ) from exc
        return float(np.asarray(gap.value if isinstance(gap, Var) else gap)), float(loss.value), float(gp.value)

    def _critic_step_stratified(self) -> Tuple[float, float, float]:
        B = self.config.batch_size
        objective, losses, gps = [], [], []
        for cell in self.active:
            obs = self.obs_members[cell]
            y_obs = self.y[self.rng.choice(obs, B)] if obs.size else np.full(B, self.anchor)
            feats = self.pool_features[self.rng.choice(self.pool_members[cell], B)]
            y_gen = self.generator(self._generator_inputs(feats))
            gap, loss, gp = self._critic_update(cell, y_obs.reshape(-1, 1), y_gen, B, B)
            objective.append(self.masses[cell] * gap)
            losses.append(loss)
            gps.append(gp)
        return math.fsum(objective), float(np.mean(losses)), float(np.mean(gps))

    def _global_batches(self) -> Tuple[np.ndarray, np.ndarray]:
        n_global = self.config.batch_size * len(self.active)
        obs_idx = self.rng.integers(0, self.y.size, n_global)
        pool_idx = self.rng.choice(self.pool_features.shape[0], n_global, p=self.pool_p)
        return obs_idx, pool_idx

    def _critic_step_no_cellnorm(self) -> Tuple[float, float, float]:
        obs_idx, pool_idx = self._global_batches()
        n_global = obs_idx.size
        y_obs = self.y[obs_idx].reshape(-1, 1)
        y_gen = self.generator(self._generator_inputs(self.pool_features[pool_idx]))
        obs_cells, gen_cells = self.obs_cells[obs_idx], self.pool_cells[pool_idx]
        objective, losses, gps = [], [], []
        for cell in self.active:
            real, fake = y_obs[obs_cells == cell], y_gen[gen_cells == cell]
            if not len(real) and not len(fake):
                continue
            gap, loss, gp = self._critic_update(cell, real, fake, n_global, n_global)
            objective.append(gap)
            losses.append(loss)
            gps.append(gp)
        return math.fsum(objective), float(np.mean(losses)), float(np.mean(gps))

    def _joint(self, features: np.ndarray, y: np.ndarray) -> np.ndarray:
        return np.hstack([features, ((np.ravel(y) - self.anchor) / self.scale).reshape(-1, 1)])

    def _critic_step_pooled(self) -> Tuple[float, float, float]:
        B = self.config.batch_size
        idx = self.rng.integers(0, self.y.size, B)
        feats = self.features[idx]
        y_gen = self.generator(self._generator_inputs(feats))
        gap, loss, gp = self._critic_update(0, self._joint(feats, self.y[idx]), self._joint(feats, y_gen), B, B)
        return gap, loss, gp

    # generator updates

    def _transport_term(self, generated: Var, observed: np.ndarray) -> Var:
        """Sorted-pairing W1 between equal-size generated and observed batches."""
        order = np.argsort(generated.value[:, 0], kind='stable')
        return ad.mean(ad.abs_(ad.take_rows(generated, order) - np.sort(observed).reshape(-1, 1)))

    def _factual_terms(self, params: List[Var]) -> Optional[Var]:
        cfg = self.config
        k_crps = cfg.crps_samples if cfg.crps_weight > 0 else 0
        k_mse = cfg.mse_samples if cfg.mse_weight > 0 else 0
        k = max(k_crps, k_mse)
        if k == 0:
            return None
        B = cfg.batch_size
        idx = self.rng.integers(0, self.y.size, B)
        y = self.y[idx].reshape(-1, 1)
        out = self.generator.apply(self._generator_inputs(np.repeat(self.features[idx], k, axis=0)), params)
        draws = ad.reshape(out, (B, k))
        terms = []
        if k_crps:
            sub = draws if k_crps == k else ad.slice_cols(draws, 0, k_crps)
            terms.append(_crps_term(sub, y) * cfg.crps_weight)
        if k_mse:
            sub = draws if k_mse == k else ad.slice_cols(draws, 0, k_mse)
            terms.append(ad.mean(ad.square(ad.mean(sub, axis=1, keepdims=True) - y)) * cfg.mse_weight)
        return sum(terms[1:], terms[0])

    def _generator_step_stratified(self, tape: Tape, params: List[Var]) -> Var:
        cfg = self.config
        B = cfg.batch_size
        feats = np.vstack([self.pool_features[self.rng.choice(self.pool_members[c], B)] for c in self.active])
        out = self.generator.apply(self._generator_inputs(feats), params)
        terms = []
        for k, cell in enumerate(self.active):
            rows = ad.take_rows(out, np.arange(k * B, (k + 1) * B))
            critic = self.critics[cell]
            q = float(self.masses[cell])
            terms.append(ad.mean(self._anchored_critic(critic)(rows, critic.freeze(tape))) * (-q))
            if cfg.transport_weight > 0:
                obs = self.obs_members[cell]
                y_obs = self.y[self.rng.choice(obs, B)] if obs.size else np.full(B, self.anchor)
                terms.append(self._transport_term(rows, y_obs) * (cfg.transport_weight * q))
        return sum(terms[1:], terms[0])

    def _generator_step_no_cellnorm(self, tape: Tape, params: List[Var]) -> Var:
        cfg = self.config
        obs_idx, pool_idx = self._global_batches()
        n_global = pool_idx.size
        out = self.generator.apply(self._generator_inputs(self.pool_features[pool_idx]), params)
        gen_cells = self.pool_cells[pool_idx]
        terms = []
        for cell in self.active:
            members = np.nonzero(gen_cells == cell)[0]
            if members.size == 0:
                continue
            critic = self.critics[cell]
            d = self._anchored_critic(critic)(ad.take_rows(out, members), critic.freeze(tape))
            terms.append(ad.sum_(d) * (-1.0 / n_global))
        if cfg.transport_weight > 0:
            terms.append(self._transport_term(out, self.y[obs_idx]) * cfg.transport_weight)
        if not terms:
            return ad.mean(out) * 0.0
        return sum(terms[1:], terms[0])

    def _generator_step_pooled(self, tape: Tape, params: List[Var]) -> Var:
        B = self.config.batch_size
        feats = self.features[self.rng.integers(0, self.y.size, B)]
        out = self.generator.apply(self._generator_inputs(feats), params)
        joint = ad.concat_cols([feats, (out - self.anchor) * (1.0 / self.scale)])
        critic = self.critics[0]
        return -ad.mean(critic.apply(joint, critic.freeze(tape)))

    def _generator_step(self) -> float:
        tape = Tape()
        params = self.generator.bind(tape)
        loss = self._generator_steps[self.objective](tape, params)
        if self.objective is not ObjectiveKind.POOLED:
            factual = self._factual_terms(params)
            if factual is not None:
                loss = loss + factual
        return self._update_generator(self.gen_adam, tape, loss, params, 'adversarial')

    @property
    def _critic_steps(self) -> Dict[ObjectiveKind, Callable[[], Tuple[float, float, float]]]:
        return {
            ObjectiveKind.STRATIFIED: self._critic_step_stratified,
            ObjectiveKind.NO_CELL_NORMALIZATION: self._critic_step_no_cellnorm,
            ObjectiveKind.POOLED: self._critic_step_pooled,
        }

    @property
    def _generator_steps(self) -> Dict[ObjectiveKind, Callable[[Tape, List[Var]], Var]]:
        return {
            ObjectiveKind.STRATIFIED: self._generator_step_stratified,
            ObjectiveKind.NO_CELL_NORMALIZATION: self._generator_step_no_cellnorm,
            ObjectiveKind.POOLED: self._generator_step_pooled,
        }

    # main loop

    def fit(self) -> TrainedModel:
        cfg = self.config
        self._setup()
        with self.monitor.timer('pretrain'):
            self._pretrain()
        self._checkpoint = self.generator.copy()

        critic_step = self._critic_steps[self.objective]
        with self.monitor.timer('adversarial'):
            for step in range(1, cfg.adversarial_steps + 1):
                self._step = step
                for _ in range(cfg.critic_steps):
                    objective, critic_loss, gp = critic_step()
                generator_loss = self._generator_step()
                if step % cfg.log_every == 0 or step == cfg.adversarial_steps:
                    self._checkpoint = self.generator.copy()
                    self.monitor.record_step(step, 'adversarial', objective, critic_loss, gp, generator_loss)
                    logger.info(
                        f"Step {step}/{cfg.adversarial_steps}: objective={objective:.4f} "
                        f"critic_loss={critic_loss:.4f} gp={gp:.4f} generator_loss={generator_loss:.4f}"
                    )

        model = TrainedModel(
            generator=self.generator,
            critics=self.critics,
            cell_map=self.cell_map,
            encoder=self.dataset.encoder,
            anchor=self.anchor,
            bound=self.bound,
            latent_dim=cfg.latent_dim,
            objective=self.objective,
            monitor=self.monitor,
            config=cfg.to_dict(),
        )
        self._post_train(model)
        return model

    def _post_train(self, model: TrainedModel):
        cal = self.config.calibration
        if cal.enabled:
            mask = self.dataset.mask(Split.VALID)
            if cal.rct_only:
                if self.dataset.sources is None:
                    raise ContractError("RCT-only calibration needs per-unit source labels")
                mask = mask & np.char.startswith(self.dataset.sources, 'nsw')
            X = self.dataset.covariates[mask]
            T = self.dataset.treatments[mask]
            y = self.dataset.outcomes[mask]
            model.calibration = calibrate_quantiles(
                model.sample_raw, X, T, y, self.dataset.encoder.arms(T), cal, self.rng
            )
        if self.config.zero_mass_matching:
            fractions = self.dataset.metadata.get('zero_fraction')
            if fractions is None:
                logger.warning("Zero-mass matching requested but the dataset records no zero fractions")
            else:
                model.zero_fractions = {int(k): float(v) for k, v in fractions.items()}
        model.validation_proxy = validation_proxy(model, self.dataset, self.rng)


def validation_proxy(model: TrainedModel, dataset: Dataset, rng: np.random.Generator,
                     split: Split = Split.VALID) -> float:
    """
    Finite-resolution factual proxy: sum_C q_C W1(validation outcomes in C,
    model draws at the same states), normalized by the charged mass.
    NaN when the split is empty.
    """
    X, T, y = dataset.arrays(split)
    if y.size == 0:
        return float('nan')
    cells = model.cell_map.cells(X, T)
    draws = model.sample_states(X, T, PROXY_DRAWS, rng)
    masses = model.cell_map.masses
    terms, charged = [], 0.0
    for cell in np.unique(cells):
        if cell >= masses.size or masses[cell] == 0:
            continue
        rows = cells == cell
        terms.append(masses[cell] * w1_arrays(y[rows], draws[rows].ravel()))
        charged += masses[cell]
    return math.fsum(terms) / charged if charged > 0 else float('nan')


def train(
    config: GaniceConfig,
    dataset: Dataset,
    target_design: TargetDesign,
    objective: ObjectiveKind = ObjectiveKind.STRATIFIED,
) -> TrainedModel:
    """
    Fit GANICE; with a restart grid, fit every variant under its own seed
    and keep the lowest validation proxy.
    """
    variants = config.restarts()
    best: Optional[TrainedModel] = None
    best_index = 0
    proxies = []
    for i, variant in enumerate(variants):
        variant.seed = config.seed + i * RESTART_SEED_STRIDE
        model = GaniceTrainer(variant, dataset, target_design, objective).fit()
        proxies.append(_proxy_key(model))
        if len(variants) > 1:
            logger.info(
                f"Restart {i + 1}/{len(variants)}: validation proxy {model.validation_proxy:.4f}",
                extra={'extra_data': {'overrides': {k: getattr(variant, k) for k in config.restart_grid}}},
            )
        if best is None or _proxy_key(model) < _proxy_key(best):
            best, best_index = model, i
    best.monitor.counter('restarts', len(variants))
    for value in proxies:
        if math.isfinite(value):
            best.monitor.histogram('restart_validation_proxy', value)
    best.monitor.gauge('selected_restart', best_index)
    if best.validation_proxy is not None:
        best.monitor.gauge('validation_proxy', best.validation_proxy)
    return best


def _proxy_key(model: TrainedModel) -> float:
    value = model.validation_proxy
    return math.inf if value is None or math.isnan(value) else value


__all__ = [
    'ObjectiveKind',
    'TrainedModel',
    'GaniceTrainer',
    'snap_zero_mass',
    'validation_proxy',
    'train',
]
