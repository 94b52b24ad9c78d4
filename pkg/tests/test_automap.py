"""
AUTOMAP 网络与数字判别器测试
"""

import numpy as np
import pytest

from src.core.ops import mse_loss
from src.core.tensor import ComputationTape, Tensor
from src.model.automap import (
    AutomapConfig,
    decode_params,
    encode_params,
    forward,
    init_params,
    load_params,
    parameter_count,
    parameter_shapes,
    reconstruct,
    save_params,
)
from src.model.oracle import DigitOracle, load_oracle, save_oracle
from src.services.formats import save_tensor_file
from src.utils.constants import ORACLE_MAGIC, Mode, ModelPreset
from src.utils.errors import FormatError, ShapeError


class TestAutomapConfig:
    """测试网络结构配置"""

    def test_full_preset(self):
        """测试完整预设: n=64，四视角输入 256"""
        cfg = AutomapConfig.from_preset("full", 4)
        assert cfg.n == 64
        assert cfg.input_len == 256
        assert cfg.fc_dims == (8192, 4096, 4096)
        assert cfg.conv_spec == ((64, 5), (64, 5), (1, 7))
        assert cfg.preset is ModelPreset.FULL

    def test_small_preset(self):
        """测试缩小预设: n=32，两视角输入 64"""
        cfg = AutomapConfig.from_preset(ModelPreset.SMALL, 2)
        assert cfg.n == 32
        assert cfg.input_len == 64
        assert cfg.fc_dims[-1] == 32 * 32

    def test_full_parameter_count(self):
        """测试完整预设、四视角的参数总数"""
        cfg = AutomapConfig.from_preset("full", 4)
        fc = (
            256 * 8192 + 8192 + 2 * 8192
            + 8192 * 4096 + 4096 + 2 * 4096
            + 4096 * 4096 + 4096 + 2 * 4096
        )  # fmt: skip
        conv = (64 * 25 + 64 + 2 * 64) + (64 * 64 * 25 + 64 + 2 * 64) + (64 * 49 + 1)
        assert parameter_count(cfg) == fc + conv == 52_585_473

    def test_preset_not_part_of_equality(self):
        """测试预设来源不影响相等比较"""
        cfg = AutomapConfig.from_preset("small", 2)
        plain = AutomapConfig(32, 64, (2048, 1024, 1024), ((64, 5), (64, 5), (1, 7)))
        assert cfg == plain

    @pytest.mark.parametrize(
        "args",
        [
            (4, 8, (6, 15), ((1, 3),)),
            (4, 8, (16,), ((2, 4), (1, 3))),
            (4, 8, (16,), ((2, 3), (2, 3))),
            (4, 0, (16,), ((1, 3),)),
            (4, 8, (16,), ()),
        ],
    )
    def test_invalid(self, args):
        """测试无效结构"""
        with pytest.raises(ValueError):
            AutomapConfig(*args)

    def test_unknown_preset(self):
        """测试未知预设"""
        with pytest.raises(ValueError):
            AutomapConfig.from_preset("huge", 4)


class TestAutomapNetwork:
    """测试网络前向与参数"""

    def setup_method(self):
        """每个测试前创建缩小的网络"""
        self.cfg = AutomapConfig(4, 8, (6, 16), ((2, 3), (1, 3)))
        self.params = init_params(self.cfg, seed=0)

    def test_init_values(self):
        """测试初始化: 偏置 0，gamma 1，运行方差 1，权重在 Glorot 界内"""
        t = self.params.tensors
        assert np.all(t["fc1.bias"].data == 0.0)
        assert np.all(t["fc1.bn.gamma"].data == 1.0)
        assert np.all(t["conv1.bn.beta"].data == 0.0)
        assert np.all(self.params.stats["fc2.bn"].var == 1.0)
        limit = np.sqrt(6.0 / (8 + 6))
        assert np.abs(t["fc1.weight"].data).max() <= limit

    def test_init_deterministic(self):
        """测试同种子初始化相同"""
        other = init_params(self.cfg, seed=0)
        for name, array in self.params.named_arrays().items():
            assert np.array_equal(array, other.named_arrays()[name])

    def test_last_conv_has_no_batchnorm(self):
        """测试最后一层卷积没有 BN"""
        shapes = parameter_shapes(self.cfg)
        assert "conv1.bn.gamma" in shapes
        assert "conv2.bn.gamma" not in shapes
        assert shapes["conv2.weight"] == (1, 2, 3, 3)

    def test_forward_shape_and_nonnegative(self, rng):
        """测试输出形状 B×1×n×n 且非负"""
        x = Tensor(rng.uniform(-1, 1, size=(3, 8)))
        for mode in (Mode.TRAIN, Mode.EVAL):
            out = forward(self.params, self.cfg, x, mode)
            assert out.dims == (3, 1, 4, 4)
            assert out.data.min() >= 0.0

    def test_eval_does_not_touch_running_stats(self, rng):
        """测试评估模式不改变运行统计量"""
        before = self.params.stats["fc1.bn"].mean.copy()
        forward(self.params, self.cfg, Tensor(rng.uniform(size=(2, 8))), Mode.EVAL)
        assert np.array_equal(self.params.stats["fc1.bn"].mean, before)

    def test_train_updates_running_stats(self, rng):
        """测试训练模式更新运行统计量"""
        before = self.params.stats["fc1.bn"].mean.copy()
        forward(self.params, self.cfg, Tensor(rng.uniform(size=(2, 8))), Mode.TRAIN)
        assert not np.array_equal(self.params.stats["fc1.bn"].mean, before)

    def test_train_needs_two_samples(self, rng):
        """测试训练模式批大小至少为 2"""
        with pytest.raises(ShapeError):
            forward(self.params, self.cfg, Tensor(rng.uniform(size=(1, 8))), Mode.TRAIN)

    def test_input_length_mismatch(self, rng):
        """测试输入长度与配置不一致"""
        with pytest.raises(ShapeError):
            forward(self.params, self.cfg, Tensor(rng.uniform(size=(2, 9))), Mode.EVAL)

    def test_config_mismatch(self, rng):
        """测试参数与配置不一致"""
        other = AutomapConfig(4, 12, (6, 16), ((2, 3), (1, 3)))
        with pytest.raises(ShapeError):
            forward(self.params, other, Tensor(rng.uniform(size=(2, 12))), Mode.EVAL)

    def test_gradient_reaches_every_parameter(self, rng):
        """测试一次反向传播后所有权重、gamma、beta 与输出偏置都有梯度"""
        # 输出层偏置为正，保证最后的 ReLU 处于激活区
        self.params.tensors["conv2.bias"].data[:] = 5.0
        x = Tensor(rng.uniform(0, 1, size=(4, 8)))
        target = Tensor(np.zeros((4, 1, 4, 4)))
        with ComputationTape() as tape:
            loss = mse_loss(forward(self.params, self.cfg, x, Mode.TRAIN), target)
        tape.backward(loss)
        for name, tensor in self.params.trainable():
            # BN 之前的偏置梯度在训练模式下恒为 0
            if name.endswith(".bias") and name != "conv2.bias":
                continue
            assert tensor.grad is not None, name
            assert np.any(tensor.grad != 0.0), name

    def test_reconstruct_matches_forward(self, rng):
        """测试分块重建与评估模式前向一致"""
        inputs = rng.uniform(size=(5, 8))
        out = reconstruct(self.params, self.cfg, inputs, chunk=2)
        expected = forward(self.params, self.cfg, Tensor(inputs), Mode.EVAL).data[:, 0]
        assert out.shape == (5, 4, 4)
        assert np.allclose(out, expected, rtol=0, atol=1e-12)


class TestWeightsFile:
    """测试权重文件"""

    def setup_method(self):
        """每个测试前创建缩小的网络"""
        self.cfg = AutomapConfig(4, 8, (6, 16), ((2, 3), (1, 3)))
        self.params = init_params(self.cfg, seed=1)

    def test_save_and_load_forward_identical(self, tmp_path, rng):
        """测试读回的权重前向结果逐位一致"""
        self.params.stats["fc1.bn"].mean[:] = rng.normal(size=6)
        path = tmp_path / "weights.amap"
        save_params(self.params, path)
        loaded = load_params(path)
        assert loaded.config == self.cfg
        x = Tensor(rng.uniform(size=(2, 8)))
        original = forward(self.params, self.cfg, x, Mode.EVAL).data
        restored = forward(loaded, self.cfg, x, Mode.EVAL).data
        assert np.array_equal(original, restored)

    def test_preset_recovered(self):
        """测试预设结构的权重读回后带预设标记"""
        params = init_params(AutomapConfig.from_preset("small", 2), seed=0)
        assert decode_params(encode_params(params)).config.preset is ModelPreset.SMALL
        assert decode_params(encode_params(self.params)).config.preset is None

    def test_bad_magic(self):
        """测试魔数错误"""
        data = b"XXXX" + encode_params(self.params)[4:]
        with pytest.raises(FormatError):
            decode_params(data)

    def test_truncated(self):
        """测试截断"""
        with pytest.raises(FormatError):
            decode_params(encode_params(self.params)[:-8])


class TestDigitOracle:
    """测试数字判别器"""

    def setup_method(self):
        """每个测试前创建 8×8 输入的判别器"""
        self.oracle = DigitOracle.initialize(seed=0, side=8, hidden=16)

    def test_predict(self, rng):
        """测试预测标签与置信度"""
        labels, confidence = self.oracle.predict(rng.uniform(size=(40, 8, 8)))
        assert labels.shape == (40,)
        assert labels.min() >= 0 and labels.max() <= 9
        assert np.all((confidence >= 0.1) & (confidence <= 1.0))

    def test_predict_shape_error(self):
        """测试输入尺寸错误"""
        with pytest.raises(ShapeError):
            self.oracle.predict(np.zeros((2, 6, 6)))

    def test_save_and_load(self, tmp_path, rng):
        """测试保存与读取（含准确率）"""
        self.oracle.accuracy = 0.97
        path = tmp_path / "oracle.aorc"
        save_oracle(self.oracle, path)
        loaded = load_oracle(path)
        assert loaded.accuracy == 0.97
        images = rng.uniform(size=(3, 8, 8))
        assert np.array_equal(loaded.predict(images)[1], self.oracle.predict(images)[1])

    def test_unmeasured_accuracy(self, tmp_path):
        """测试未测量的准确率读回为 None"""
        path = tmp_path / "oracle.aorc"
        save_oracle(self.oracle, path)
        assert load_oracle(path).accuracy is None

    def test_missing_accuracy(self, tmp_path):
        """测试文件缺少准确率"""
        path = tmp_path / "oracle.aorc"
        arrays = {name: t.data for name, t in self.oracle.trainable()}
        save_tensor_file(path, ORACLE_MAGIC, arrays)
        with pytest.raises(FormatError):
            load_oracle(path)


if __name__ == "__main__":
    pytest.main([__file__])
