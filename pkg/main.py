"""
稀疏视角 CT 重建实验主入口
"""

import argparse
import os
import sys
from typing import Callable, Optional, Sequence

from dotenv import load_dotenv

# 线程数必须在 numpy 导入前设置
load_dotenv()
_THREAD_VARIABLES = (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
)


def _export_thread_count() -> None:
    threads = os.getenv("AUTOMAP_NUM_THREADS", "").strip()
    if threads.isdigit() and int(threads) > 0:
        for name in _THREAD_VARIABLES:
            os.environ[name] = threads


_export_thread_count()

from src.config import load_run_config, runtime_config  # noqa: E402
from src.core.grid import AngleSet  # noqa: E402
from src.data.intensity import hu_to_normalized  # noqa: E402
from src.data.phantom import (  # noqa: E402
    PhantomSpec,
    generate_phantom_set,
    write_phantom_set,
)
from src.experiment import (  # noqa: E402
    run_evaluation,
    run_oracle_training,
    run_training,
)
from src.geometry.radon import fbp_reconstruct, forward_project  # noqa: E402
from src.services.formats import (  # noqa: E402
    load_image_file,
    load_sinogram,
    save_image,
    save_sinogram,
    write_pgm,
)
from src.ui.console_renderer import ConsoleRenderer  # noqa: E402
from src.ui.grid_renderer import window_to_bytes  # noqa: E402
from src.utils.constants import (  # noqa: E402
    DEFAULT_PITCH_MM,
    EXIT_CONFIG_ERROR,
    EXIT_IO_ERROR,
    EXIT_NUMERIC_ERROR,
    EXIT_OK,
    IntensityDomain,
)
from src.utils.errors import ConfigError, FormatError  # noqa: E402


def parse_angles(text: str) -> AngleSet:
    """
    解析角度参数: 预设名（four_view / two_view）或逗号分隔的角度列表

    Raises:
        ConfigError: 未知预设或无效角度
    """
    try:
        if "," in text or text.replace(".", "", 1).isdigit():
            return AngleSet([float(part) for part in text.split(",")])
        return AngleSet.from_preset(text)
    except ValueError as exc:
        raise ConfigError(f"无效的角度参数 {text!r}: {exc}") from None


def cmd_project(args: argparse.Namespace, renderer: ConsoleRenderer) -> None:
    """图像 -> 正弦图"""
    angles = parse_angles(args.angles)
    img = load_image_file(args.image, args.pitch)
    if img.domain is IntensityDomain.HOUNSFIELD:
        img = hu_to_normalized(img)
    sino = forward_project(img, angles)
    save_sinogram(args.out, sino)
    renderer.render_info(f"{img.n}×{img.n} 图像投影到 {len(angles)} 个角度")
    renderer.render_artifact("正弦图", args.out)


def cmd_fbp(args: argparse.Namespace, renderer: ConsoleRenderer) -> None:
    """正弦图 -> FBP 重建（.pgm 输出为 8 位灰度，其余为无损图像文件）"""
    recon = fbp_reconstruct(load_sinogram(args.sino))
    if str(args.out).lower().endswith(".pgm"):
        write_pgm(args.out, window_to_bytes(recon))
    else:
        save_image(args.out, recon)
    renderer.render_artifact("FBP 重建", args.out)


def _run_overrides(args: argparse.Namespace) -> dict:
    return {
        "epochs": args.epochs,
        "seed": args.seed,
        "output_dir": args.output_dir,
        "data_dir": args.data_dir,
    }


def cmd_train(args: argparse.Namespace, renderer: ConsoleRenderer) -> None:
    """按配置训练"""
    run = load_run_config(args.config, _run_overrides(args))
    result, run_dir = run_training(run, renderer, resume=args.resume)
    renderer.render_report(
        "训练完成",
        [
            ("run_id", run.run_id),
            ("epochs", result.state.epoch),
            ("steps", result.state.step),
            ("final_loss", result.final_loss),
        ],
    )
    renderer.render_artifact("运行目录", run_dir)


def cmd_eval(args: argparse.Namespace, renderer: ConsoleRenderer) -> None:
    """按配置评估"""
    overrides = _run_overrides(args)
    overrides["oracle_path"] = args.oracle
    run = load_run_config(args.config, overrides)
    _, run_dir = run_evaluation(run, args.weights, renderer)
    renderer.render_artifact("运行目录", run_dir)


def cmd_make_phantoms(args: argparse.Namespace, renderer: ConsoleRenderer) -> None:
    """生成体模及其正弦图"""
    if args.count < 1:
        raise ConfigError(f"--count 必须为正: {args.count}")
    if args.seed < 0:
        raise ConfigError(f"--seed 必须非负: {args.seed}")
    angles = parse_angles(args.angles)
    phantoms = generate_phantom_set(PhantomSpec(), args.count, args.seed)
    written = write_phantom_set(args.out, phantoms, angles)
    renderer.render_info(f"生成 {len(phantoms)} 个体模，共 {len(written)} 个文件")
    renderer.render_artifact("体模目录", args.out)


def cmd_train_oracle(args: argparse.Namespace, renderer: ConsoleRenderer) -> None:
    """训练数字判别器"""
    data_dir = args.data or runtime_config.data_dir
    if not data_dir:
        raise ConfigError("需要 --data 或环境变量 AUTOMAP_DATA_DIR")
    oracle = run_oracle_training(data_dir, args.out, args.seed, args.epochs, renderer)
    renderer.render_report("判别器", [("accuracy", oracle.accuracy)])


def _add_run_overrides(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="YAML 运行配置文件")
    parser.add_argument("--epochs", type=int, help="覆盖训练轮数")
    parser.add_argument("--seed", type=int, help="覆盖随机种子")
    parser.add_argument("--output-dir", help="覆盖输出目录")
    parser.add_argument("--data-dir", help="覆盖 MNIST 数据目录")


def build_parser() -> argparse.ArgumentParser:
    """构建命令行解析器"""
    parser = argparse.ArgumentParser(description="稀疏视角 CT 重建实验")
    parser.add_argument("--quiet", action="store_true", help="不输出进度")
    parser.add_argument("--debug", action="store_true", help="出错时打印调用栈")
    subparsers = parser.add_subparsers(dest="command", required=True)

    project = subparsers.add_parser("project", help="图像投影为正弦图")
    project.add_argument("--image", required=True, help="输入图像（.img 或 P5 .pgm）")
    project.add_argument(
        "--angles", default="four_view", help="four_view、two_view 或角度列表"
    )
    project.add_argument("--out", required=True, help="输出正弦图文件")
    project.add_argument(
        "--pitch", type=float, default=DEFAULT_PITCH_MM, help="PGM 输入的像素间距 (mm)"
    )
    project.set_defaults(handler=cmd_project)

    fbp = subparsers.add_parser("fbp", help="滤波反投影重建")
    fbp.add_argument("--sino", required=True, help="输入正弦图文件")
    fbp.add_argument("--out", required=True, help="输出图像（.img 或 .pgm）")
    fbp.set_defaults(handler=cmd_fbp)

    train = subparsers.add_parser("train", help="训练 AUTOMAP")
    _add_run_overrides(train)
    train.add_argument("--resume", action="store_true", help="从运行目录中的检查点继续")
    train.set_defaults(handler=cmd_train)

    evaluate = subparsers.add_parser("eval", help="评估训练好的模型")
    _add_run_overrides(evaluate)
    evaluate.add_argument("--weights", help="权重文件（默认为运行目录中的权重）")
    evaluate.add_argument("--oracle", help="覆盖数字判别器文件")
    evaluate.set_defaults(handler=cmd_eval)

    phantoms = subparsers.add_parser("make-phantoms", help="生成合成体模")
    phantoms.add_argument("--count", type=int, required=True, help="体模数量")
    phantoms.add_argument("--seed", type=int, required=True, help="随机种子")
    phantoms.add_argument("--out", required=True, help="输出目录")
    phantoms.add_argument("--angles", default="four_view", help="正弦图角度")
    phantoms.set_defaults(handler=cmd_make_phantoms)

    oracle = subparsers.add_parser("train-oracle", help="训练数字判别器")
    oracle.add_argument("--data", help="MNIST 数据目录（默认 AUTOMAP_DATA_DIR）")
    oracle.add_argument("--out", required=True, help="输出判别器文件")
    oracle.add_argument("--seed", type=int, default=0, help="随机种子")
    oracle.add_argument("--epochs", type=int, default=5, help="训练轮数")
    oracle.set_defaults(handler=cmd_train_oracle)
    return parser


def exit_code_for(exc: BaseException) -> int:
    """
    异常 -> 退出码

    NumericError、OracleGateError 与其余运行期失败（如空计算带）均为 3
    """
    if isinstance(exc, (FormatError, OSError)):
        return EXIT_IO_ERROR
    if isinstance(exc, ValueError):
        return EXIT_CONFIG_ERROR
    return EXIT_NUMERIC_ERROR


def main(argv: Optional[Sequence[str]] = None) -> int:
    """主函数，返回退出码"""
    parser = build_parser()
    args = parser.parse_args(argv)
    renderer = ConsoleRenderer(quiet=args.quiet)
    debug = args.debug or runtime_config.debug

    if not runtime_config.validate():
        renderer.render_error("AUTOMAP_NUM_THREADS 必须是正整数")
        return EXIT_CONFIG_ERROR

    handler: Callable[[argparse.Namespace, ConsoleRenderer], None] = args.handler
    try:
        handler(args, renderer)
    except KeyboardInterrupt:
        renderer.render_error("被用户中断")
        return 130
    except (ValueError, ArithmeticError, RuntimeError, OSError) as exc:
        renderer.render_error(str(exc))
        if debug:
            import traceback

            traceback.print_exc()
        return exit_code_for(exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
