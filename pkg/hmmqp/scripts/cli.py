"""
CLI de hmmqp: generar datos, ajustar la mezcla, estimar pi y A, Baum-Welch
y los experimentos del estudio de simulación

Códigos de salida: 0 éxito, 1 verificación de tasa fallida, 2 entrada o
config inválida, 3 fallo numérico (o corridas fallidas en el barrido)
"""
import argparse
import json
import sys
from pathlib import Path

# Agregar directorio raíz al path
sys.path.append(str(Path(__file__).parent.parent.parent))

import numpy as np
from rich.console import Console
from rich.table import Table

from hmmqp.bench.experiment import ResultSet, rate_check, run_experiment, stability_sweep
from hmmqp.core.baseline import BaumWelchInit, baum_welch, random_init
from hmmqp.exceptions import (
    NUMERICAL_ERRORS,
    HMMQPError,
    InvalidConfig,
    InvalidModel,
    SequenceTooShort,
    SymbolOutOfRange,
)
from hmmqp.core.mixture import em_fit
from hmmqp.core.model import GaussianOutputModel, sample
from hmmqp.core.pipeline import full_pipeline
from hmmqp.preprocessing.sequence_loader import SequenceLoader
from hmmqp.utils.config_loader import ConfigLoader, EstimationOptions, MixtureConfig
from hmmqp.utils.logger import configure_logging

console = Console()

EXIT_OK = 0
EXIT_RATE_FAILED = 1
EXIT_INVALID = 2
EXIT_NUMERICAL = 3

INPUT_ERRORS = (InvalidConfig, InvalidModel, SymbolOutOfRange, SequenceTooShort, FileNotFoundError)


def _matrix_table(title: str, matrix: np.ndarray) -> Table:
    table = Table(title=title, show_lines=False)
    table.add_column("", style="cyan")
    for j in range(matrix.shape[1]):
        table.add_column(str(j), justify="right")
    for i, row in enumerate(matrix):
        table.add_row(str(i), *[f"{v:.4f}" for v in row])
    return table


def _load_config(path: str):
    path = Path(path)
    if path.is_dir():
        return ConfigLoader.load_from_instance(path)
    return ConfigLoader.load(path)


def cmd_generate(args) -> int:
    spec = SequenceLoader.load_model(args.model)
    path, y = sample(spec, args.T, args.seed)
    kind = "discrete" if spec.is_discrete else "continuous"
    SequenceLoader.save_sequence(y, args.out, kind)
    if args.hidden:
        SequenceLoader.save_sequence(path, args.hidden, "discrete")
    console.print(f"✓ {args.T} observaciones ({kind}) guardadas en {args.out}")
    return EXIT_OK


def cmd_fit_mixture(args) -> int:
    kind, sequences = SequenceLoader.load_sequence(args.data)
    if kind != "continuous":
        raise InvalidModel("fit-mixture requiere una secuencia continua")
    config = MixtureConfig(max_iters=args.max_iters, tol=args.tol, restarts=args.restarts, seed=args.seed)
    fit = em_fit(sequences, args.n, config)

    table = Table(title="Mezcla ajustada por EM")
    table.add_column("k", style="cyan")
    table.add_column("peso", justify="right")
    table.add_column("mu", justify="right")
    table.add_column("sigma2", justify="right")
    for k, (w, (mu, s2)) in enumerate(zip(fit.weights, fit.components)):
        table.add_row(str(k), f"{w:.4f}", f"{mu:.4f}", f"{s2:.4f}")
    console.print(table)
    console.print(f"loglik={fit.loglik:.4f}, iteraciones={fit.iterations}, reinicios válidos={fit.restarts_used}")

    if args.out:
        SequenceLoader.save_json(fit.to_dict(), args.out)
        console.print(f"✓ Salidas guardadas en {args.out}")
    return EXIT_OK


def cmd_estimate(args) -> int:
    _, sequences = SequenceLoader.load_sequence(args.data)
    outputs = SequenceLoader.load_outputs(args.outputs)
    truth = SequenceLoader.load_model(args.truth) if args.truth else None
    options = EstimationOptions(
        objective="unweighted" if args.unweighted else "weighted",
        stationarity_constraint=False if args.no_stationarity_constraint else None,
        use_eta_prime=args.eta_prime,
    )
    report = full_pipeline(sequences, outputs, options, truth=truth)

    console.print(f"pi_hat = {np.round(report.pi_hat, 4).tolist()}  ({report.pi.method})")
    console.print(_matrix_table("A_hat", report.A_hat))
    if report.errors:
        console.print(
            f"||pi_hat - pi||_2 = {report.errors['pi_l2']:.3e}, "
            f"||A_hat - A||_F^2 = {report.errors['A_frobenius_sq']:.3e}"
        )
    if args.out:
        report.to_json(args.out)
        console.print(f"✓ Reporte guardado en {args.out}")
    return EXIT_OK


def cmd_baum_welch(args) -> int:
    kind, sequences = SequenceLoader.load_sequence(args.data)
    if args.init:
        spec = SequenceLoader.load_model(args.init)
        init = BaumWelchInit(spec.A, spec.outputs, fix_outputs=args.fix_outputs, initial=spec.initial)
    elif kind == "continuous":
        init = random_init(args.n, args.seed, y=sequences)
    else:
        m = int(max(int(s.max()) for s in sequences)) + 1
        init = random_init(args.n, args.seed, m=max(m, args.n))
    result = baum_welch(sequences, args.n, init, args.iters)

    console.print(_matrix_table("A_hat (Baum-Welch)", result.A_hat.entries))
    if isinstance(result.outputs_hat, GaussianOutputModel):
        console.print(f"salidas = {[tuple(round(v, 4) for v in c) for c in result.outputs_hat.components]}")
    console.print(f"loglik: {result.loglik_trace[0]:.4f} -> {result.loglik_trace[-1]:.4f} en {result.iterations} iteraciones")
    if args.out:
        data = {
            "n": args.n,
            "A": result.A_hat.entries.tolist(),
            "outputs": result.outputs_hat.to_dict(),
            "loglik_trace": result.loglik_trace,
        }
        SequenceLoader.save_json(data, args.out)
        console.print(f"✓ Resultado guardado en {args.out}")
    return EXIT_OK


def cmd_benchmark(args) -> int:
    config = _load_config(args.config)
    if args.workers:
        config.workers = args.workers
    if args.output_dir:
        config.output_dir = args.output_dir
    configure_logging(config.log_level, config.instance_path / "logs")
    results = run_experiment(config.validate())

    table = Table(title=f"Resumen: {config.name}")
    for column in ("método", "descripción", "T", "corridas", "fallidas", "mediana ||A_hat-A||_F^2", "media"):
        table.add_column(column, justify="right")
    for row in results.summary():
        table.add_row(
            str(row["method"]), row["label"], str(row["T"]), str(row["runs"]), str(row["failures"]),
            f"{row['median_frobenius_sq_error']:.3e}", f"{row['mean_frobenius_sq_error']:.3e}",
        )
    console.print(table)
    console.print(f"✓ CSV en {config.output_path}")
    return EXIT_NUMERICAL if results.failures else EXIT_OK


def cmd_rate_check(args) -> int:
    results = ResultSet.read_csv(args.results)
    check = rate_check(results, args.quantity, args.method)
    console.print(json.dumps(check.to_dict(), indent=2))
    verdict = "[green]OK[/green]" if check.passed else "[red]FALLA[/red]"
    console.print(f"Pendiente {check.slope:.3f} (esperada {check.expected} ± {check.window}): {verdict}")
    return EXIT_OK if check.passed else EXIT_RATE_FAILED


def cmd_stability(args) -> int:
    config = _load_config(args.config)
    configure_logging(config.log_level, config.instance_path / "logs")
    spec = SequenceLoader.load_model(config.model)
    T = args.T or config.stability.T
    result = stability_sweep(
        spec, config.stability.epsilons, T, config.seeds, config.estimation, progress=True
    )
    out = Path(args.out) if args.out else config.output_path / "stability.csv"
    result.write_csv(out)

    table = Table(title=f"Estabilidad (T={T})")
    table.add_column("epsilon", justify="right")
    table.add_column("mediana error agregado", justify="right")
    for eps, median in result.median_curve():
        table.add_row(f"{eps:g}", f"{median:.3e}")
    console.print(table)
    console.print(f"Curva monótona: {result.is_monotone()}  ✓ CSV en {out}")
    failed = any(r.status != "ok" for r in result.rows)
    return EXIT_NUMERICAL if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hmmqp",
        description="Aprendizaje desacoplado de HMMs con salidas paramétricas"
    )
    parser.add_argument("--log-level", default="WARNING", help="Nivel de logging (default: WARNING)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="Muestrea una secuencia de un modelo")
    p.add_argument("--model", required=True, help="Archivo de modelo JSON o builtin (toy4)")
    p.add_argument("--T", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--hidden", default=None, help="Archivo opcional para el camino oculto")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("fit-mixture", help="Ajusta la mezcla gaussiana por EM")
    p.add_argument("--data", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="Guarda las salidas en el esquema del archivo de modelo")
    p.set_defaults(func=cmd_fit_mixture)

    p = sub.add_parser("estimate", help="Estima pi y A por QP con salidas dadas")
    p.add_argument("--data", required=True)
    p.add_argument("--outputs", required=True, help="Archivo de salidas o de modelo")
    weighting = p.add_mutually_exclusive_group()
    weighting.add_argument("--weighted", action="store_true", help="Objetivo ponderado (default)")
    weighting.add_argument("--unweighted", action="store_true", help="Objetivo sin ponderar")
    p.add_argument("--no-stationarity-constraint", action="store_true")
    p.add_argument("--eta-prime", action="store_true", help="Usa eta' y K en lugar de eta y F")
    p.add_argument("--truth", default=None, help="Modelo verdadero para reportar errores")
    p.add_argument("--out", default=None, help="Reporte JSON (report-v1)")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("baum-welch", help="Baum-Welch de referencia")
    p.add_argument("--data", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--init", default=None, help="Modelo inicial (default: aleatorio)")
    p.add_argument("--iters", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fix-outputs", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_baum_welch)

    p = sub.add_parser("benchmark", help="Barrido de métodos 1-7")
    p.add_argument("--config", required=True, help="experiment.yaml/.json o carpeta de instancia")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--output-dir", default=None)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("rate-check", help="Pendiente log-log del error frente a T")
    p.add_argument("--results", required=True, help="results.csv de un barrido")
    p.add_argument("--quantity", default="frobenius_sq_error")
    p.add_argument("--method", type=int, default=2)
    p.set_defaults(func=cmd_rate_check)

    p = sub.add_parser("stability", help="Barrido de perturbación de theta")
    p.add_argument("--config", required=True)
    p.add_argument("--T", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_stability)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level)

    try:
        return args.func(args)
    except INPUT_ERRORS as e:
        console.print(f"\n[red]❌ Entrada inválida:[/red] {e}")
        return EXIT_INVALID
    except NUMERICAL_ERRORS as e:
        console.print(f"\n[red]❌ Fallo numérico ({type(e).__name__}):[/red] {e}")
        return EXIT_NUMERICAL
    except HMMQPError as e:
        console.print(f"\n[red]❌ Error ({type(e).__name__}):[/red] {e}")
        return EXIT_INVALID if isinstance(e, ValueError) else EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
