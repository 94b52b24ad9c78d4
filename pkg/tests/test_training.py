"""
训练引擎测试
"""

import numpy as np
import pytest

from src.core.grid import AngleSet
from src.core.tensor import Tensor
from src.data.records import ImageCollection
from src.data.splits import split_random_sized
from src.engine import sinogram_cache
from src.engine.optimizer import (
    OptimizerState,
    load_optimizer_state,
    rmsprop_step,
    save_optimizer_state,
)
from src.engine.oracle_training import oracle_train_config, train_oracle
from src.engine.sinogram_cache import SinogramStore, geometry_key, precompute_sinograms
from src.engine.train_config import TrainConfig
from src.engine.trainer import (
    LOSS_LOG_FILE,
    OPTIMIZER_FILE,
    WEIGHTS_FILE,
    batches_per_epoch,
    epoch_batches,
    load_checkpoint,
    train,
)
from src.model.automap import AutomapConfig
from src.services.formats import read_loss_log
from src.utils.constants import AnglePreset
from src.utils.errors import FormatError, NumericError, ShapeError
from tests.conftest import digit_images

# n=8、两视角 -> 输入长度 16
TINY_MODEL = AutomapConfig(8, 16, (12, 64), ((2, 3), (1, 3)))


def tiny_train_config(**overrides):
    values = {
        "epochs": 2,
        "learning_rate": 1e-3,
        "batch_size": 4,
        "seed": 5,
        "checkpoint_every": 1,
        "angle_preset": AnglePreset.TWO_VIEW,
    }
    values.update(overrides)
    return TrainConfig(**values)


class TestTrainConfig:
    """测试训练配置"""

    def test_defaults(self):
        """测试默认超参数"""
        cfg = TrainConfig()
        assert cfg.epochs == 50
        assert cfg.learning_rate == 2e-5
        assert cfg.rmsprop_rho == 0.9
        assert cfg.rmsprop_eps == 1e-8
        assert cfg.batch_size == 64
        assert cfg.angle_preset is AnglePreset.FOUR_VIEW

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"epochs": 0},
            {"learning_rate": 0.0},
            {"rmsprop_rho": 1.0},
            {"rmsprop_eps": 0.0},
            {"batch_size": 1},
            {"seed": -1},
            {"checkpoint_every": 0},
            {"angle_preset": "one_view"},
        ],
    )
    def test_invalid(self, kwargs):
        """测试无效配置"""
        with pytest.raises(ValueError):
            TrainConfig(**kwargs)


class TestRMSProp:
    """测试 RMSProp 更新"""

    def setup_method(self):
        """每个测试前创建单个标量参数"""
        self.theta = Tensor([1.0], name="theta")
        self.params = [("theta", self.theta)]
        self.cfg = TrainConfig()

    def test_hand_example(self):
        """测试 θ=1, v=0, g=1 的一步更新"""
        state = OptimizerState({"theta": np.zeros(1)})
        rmsprop_step(self.params, {"theta": np.array([1.0])}, state, self.cfg)
        assert state.accumulators["theta"][0] == pytest.approx(0.1)
        expected = 1.0 - 2e-5 / (np.sqrt(0.1) + 1e-8)
        assert self.theta.data[0] == pytest.approx(expected, rel=1e-12)
        assert self.theta.data[0] == pytest.approx(0.9999367, abs=1e-7)
        assert state.step == 1

    def test_zero_gradient(self):
        """测试零梯度: 参数不变，累加器按 ρ 衰减"""
        state = OptimizerState({"theta": np.array([0.5])})
        rmsprop_step(self.params, {"theta": np.zeros(1)}, state, self.cfg)
        assert self.theta.data[0] == 1.0
        assert state.accumulators["theta"][0] == pytest.approx(0.45)

    def test_non_finite_gradient_aborts_step(self):
        """测试非有限梯度: 整步放弃并指明参数名"""
        other = Tensor([2.0])
        params = [("other", other), ("theta", self.theta)]
        state = OptimizerState({"other": np.zeros(1), "theta": np.zeros(1)})
        grads = {"other": np.array([1.0]), "theta": np.array([np.nan])}
        with pytest.raises(NumericError) as info:
            rmsprop_step(params, grads, state, self.cfg)
        assert info.value.name == "theta"
        assert other.data[0] == 2.0
        assert state.accumulators["other"][0] == 0.0
        assert state.step == 0

    def test_shape_mismatch(self):
        """测试梯度形状不一致"""
        state = OptimizerState({"theta": np.zeros(1)})
        with pytest.raises(ShapeError):
            rmsprop_step(self.params, {"theta": np.zeros(2)}, state, self.cfg)

    def test_negative_accumulator_rejected(self):
        """测试累加器不能为负"""
        with pytest.raises(ValueError):
            OptimizerState({"theta": np.array([-1.0])})

    def test_state_file(self, tmp_path):
        """测试优化器状态保存与读取"""
        state = OptimizerState({"a": np.array([0.1, 0.2])}, epoch=3, step=17)
        path = tmp_path / "opt.aopt"
        save_optimizer_state(path, state)
        loaded = load_optimizer_state(path)
        assert loaded.epoch == 3
        assert loaded.step == 17
        assert np.array_equal(loaded.accumulators["a"], [0.1, 0.2])

    def test_state_file_wrong_magic(self, tmp_path):
        """测试读取非优化器文件"""
        path = tmp_path / "opt.aopt"
        path.write_bytes(b"AMAP" + b"\x01\x00\x00\x00")
        with pytest.raises(FormatError):
            load_optimizer_state(path)


class TestSinogramCache:
    """测试正弦图预计算缓存"""

    def setup_method(self):
        """每个测试前创建小图像集合"""
        images, labels = digit_images(6, seed=4)
        self.data = ImageCollection(images / 255.0, labels, pitch_mm=1.0)
        self.angles = AngleSet.from_preset("four_view")

    def test_row_length(self):
        """测试每行长度为 角度数 × n"""
        store = precompute_sinograms(self.data, self.angles, 16, 5.0)
        assert len(store) == 6
        assert store.row_length == 4 * 16

    def test_cache_hit(self, tmp_path, monkeypatch):
        """测试相同几何与数据直接读缓存"""
        path = tmp_path / "inputs.npz"
        first = precompute_sinograms(self.data, self.angles, 16, 5.0, cache_path=path)
        assert path.is_file()

        def fail(*args, **kwargs):
            raise AssertionError("不应重新计算")

        monkeypatch.setattr(sinogram_cache, "compute_vectors", fail)
        second = precompute_sinograms(self.data, self.angles, 16, 5.0, cache_path=path)
        assert np.array_equal(first.vectors, second.vectors)

    def test_cache_miss_on_geometry_change(self, tmp_path):
        """测试几何变化时重新计算并覆盖缓存"""
        path = tmp_path / "inputs.npz"
        precompute_sinograms(self.data, self.angles, 16, 5.0, cache_path=path)
        two_view = AngleSet.from_preset("two_view")
        store = precompute_sinograms(self.data, two_view, 16, 5.0, cache_path=path)
        assert store.row_length == 32
        assert SinogramStore.load(path).key == geometry_key(two_view, 16, 5.0)

    def test_cache_miss_on_data_change(self, tmp_path):
        """测试数据变化时重新计算"""
        path = tmp_path / "inputs.npz"
        first = precompute_sinograms(self.data, self.angles, 16, 5.0, cache_path=path)
        changed = ImageCollection(
            self.data.images[::-1].copy(), self.data.labels[::-1].copy(), pitch_mm=1.0
        )
        second = precompute_sinograms(changed, self.angles, 16, 5.0, cache_path=path)
        assert np.allclose(second.vectors, first.vectors[::-1], rtol=0, atol=1e-12)

    def test_corrupt_cache_is_recomputed(self, tmp_path):
        """测试损坏的缓存文件被重新计算"""
        path = tmp_path / "inputs.npz"
        path.write_bytes(b"not a zip file")
        store = precompute_sinograms(self.data, self.angles, 16, 5.0, cache_path=path)
        assert len(store) == 6

    def test_geometry_key(self):
        """测试几何哈希区分角度、尺寸与间距"""
        key = geometry_key(self.angles, 16, 5.0)
        assert key == geometry_key(AngleSet([0.0, 45.0, 90.0, 135.0]), 16, 5.0)
        assert key != geometry_key(self.angles, 32, 5.0)
        assert key != geometry_key(self.angles, 16, 1.0)


class TestBatches:
    """测试批划分"""

    def test_every_index_once(self):
        """测试每轮每个样本恰好出现一次"""
        indices = np.arange(10, 23)
        batches = epoch_batches(indices, 4, seed=1, epoch=0)
        assert sorted(np.concatenate(batches).tolist()) == indices.tolist()

    def test_single_sample_tail_is_merged(self):
        """测试只剩 1 个样本的尾批并入前一批"""
        batches = epoch_batches(np.arange(9), 4, seed=0, epoch=0)
        assert [len(b) for b in batches] == [4, 5]
        assert batches_per_epoch(9, 4) == 2
        assert batches_per_epoch(10, 4) == 3
        assert batches_per_epoch(8, 4) == 2

    def test_shuffle_depends_on_epoch(self):
        """测试洗牌由 (seed, epoch) 决定"""
        indices = np.arange(50)
        first = epoch_batches(indices, 50, seed=2, epoch=0)[0]
        again = epoch_batches(indices, 50, seed=2, epoch=0)[0]
        later = epoch_batches(indices, 50, seed=2, epoch=1)[0]
        assert np.array_equal(first, again)
        assert not np.array_equal(first, later)


class TestTrainer:
    """测试训练循环"""

    def setup_method(self):
        """每个测试前创建 10 训练 / 4 测试的划分"""
        images, labels = digit_images(20, seed=6)
        data = ImageCollection(images / 255.0, labels, pitch_mm=1.0)
        self.split = split_random_sized(data, 10, 4, seed=0)

    def test_loss_log(self, tmp_path):
        """测试每步一条损失记录，检查点文件齐全"""
        result = train(
            self.split, tiny_train_config(), TINY_MODEL, checkpoint_dir=tmp_path
        )
        assert len(result.loss_log) == 2 * batches_per_epoch(10, 4)
        assert [r.step for r in result.loss_log] == list(range(1, 7))
        assert [r.epoch for r in result.loss_log] == [1, 1, 1, 2, 2, 2]
        assert all(np.isfinite(r.loss) and r.loss >= 0 for r in result.loss_log)
        assert result.state.epoch == 2
        for name in (WEIGHTS_FILE, OPTIMIZER_FILE, LOSS_LOG_FILE):
            assert (tmp_path / name).is_file()
        assert len(read_loss_log(tmp_path / LOSS_LOG_FILE)) == 6

    def test_deterministic(self):
        """测试同配置两次训练结果逐位一致"""
        first = train(self.split, tiny_train_config(), TINY_MODEL)
        second = train(self.split, tiny_train_config(), TINY_MODEL)
        assert [r.loss for r in first.loss_log] == [r.loss for r in second.loss_log]
        for name, array in first.params.named_arrays().items():
            assert np.array_equal(array, second.params.named_arrays()[name]), name

    def test_resume_matches_uninterrupted(self, tmp_path):
        """测试 1 轮检查点续训 1 轮与直接训练 2 轮一致"""
        straight = train(self.split, tiny_train_config(epochs=2), TINY_MODEL)
        train(
            self.split,
            tiny_train_config(epochs=1),
            TINY_MODEL,
            checkpoint_dir=tmp_path,
        )
        _, state, log = load_checkpoint(tmp_path)
        assert state.epoch == 1
        assert len(log) == 3
        resumed = train(
            self.split,
            tiny_train_config(epochs=2),
            TINY_MODEL,
            checkpoint_dir=tmp_path,
            resume_from=tmp_path,
        )
        assert resumed.loss_log == straight.loss_log
        for name, array in straight.params.named_arrays().items():
            assert np.array_equal(array, resumed.params.named_arrays()[name]), name

    def test_resume_with_other_model_rejected(self, tmp_path):
        """测试检查点结构与网络配置不一致"""
        cfg = tiny_train_config(epochs=1)
        train(self.split, cfg, TINY_MODEL, checkpoint_dir=tmp_path)
        other = AutomapConfig(8, 16, (10, 64), ((2, 3), (1, 3)))
        with pytest.raises(ShapeError):
            train(self.split, tiny_train_config(), other, resume_from=tmp_path)

    def test_input_length_mismatch(self):
        """测试输入长度与网络配置不一致"""
        four_view = AutomapConfig(8, 32, (12, 64), ((2, 3), (1, 3)))
        with pytest.raises(ShapeError):
            train(self.split, tiny_train_config(), four_view)

    def test_non_finite_inputs(self):
        """测试非有限输入导致数值失败"""
        store = SinogramStore(np.full((20, 16), np.nan), "key", "data")
        with pytest.raises(NumericError):
            train(self.split, tiny_train_config(), TINY_MODEL, store=store)

    def test_training_set_too_small(self):
        """测试训练集少于 2 个样本"""
        split = split_random_sized(self.split.data, 1, 4, seed=0)
        with pytest.raises(ShapeError):
            train(split, tiny_train_config(), TINY_MODEL)

    @pytest.mark.slow
    def test_overfits_small_set(self):
        """测试小训练集上损失明显下降"""
        result = train(
            self.split, tiny_train_config(epochs=60, checkpoint_every=60), TINY_MODEL
        )
        per_epoch = {}
        for record in result.loss_log:
            per_epoch.setdefault(record.epoch, []).append(record.loss)
        first = np.mean(per_epoch[1])
        last = np.mean(per_epoch[60])
        assert last < 0.5 * first


class TestOracleTraining:
    """测试数字判别器训练"""

    def test_default_config(self):
        """测试判别器默认训练配置"""
        cfg = oracle_train_config(seed=3, epochs=2)
        assert cfg.learning_rate == 1e-3
        assert cfg.seed == 3
        assert cfg.epochs == 2

    def test_learns_separable_digits(self, small_digits):
        """测试在可分的合成数字上达到较高留出准确率"""
        images, labels = digit_images(20, seed=9)
        heldout = ImageCollection(images / 255.0, labels, pitch_mm=1.0)
        cfg = TrainConfig(epochs=30, learning_rate=1e-3, batch_size=8, seed=0)
        oracle = train_oracle(small_digits, cfg, heldout, side=16)
        assert oracle.side == 16
        assert oracle.accuracy is not None
        assert oracle.accuracy >= 0.8

    def test_without_heldout(self, small_digits):
        """测试没有留出集时不记录准确率"""
        cfg = TrainConfig(epochs=1, learning_rate=1e-3, batch_size=8, seed=0)
        oracle = train_oracle(small_digits, cfg, side=8)
        assert oracle.accuracy is None

    def test_too_few_samples(self, small_digits):
        """测试样本不足"""
        with pytest.raises(ValueError):
            train_oracle(small_digits[:1], oracle_train_config(), side=8)


if __name__ == "__main__":
    pytest.main([__file__])
