"""gnuplot scripts for the four trajectory figures.

Scripts read one trace CSV by column name, so they need gnuplot >= 5.4
(``set datafile columnheaders``).
"""
from __future__ import annotations

import re
from pathlib import Path

FIGURES = {
    "fig1_G_n": ("G_n", 'column("G_n")', "G_n = |theta error|^2 sqrt(n) / log n"),
    "fig2_regret_log": ("regret / log n",
                        '(column("k") >= 1 ? column("cum_regret") / log(column("k") + 1) : NaN)',
                        "(1/log n) sum R_k"),
    "fig3_regret_avg": ("regret / n", 'column("cum_regret") / (column("k") + 1)',
                        "(1/n) sum R_k"),
    "fig4_L_n": ("L_n", 'column("L_n")', "L_n = |J_n - sigma^2| sqrt(n / log log n)"),
}

_TEMPLATE = """\
# {title}
set datafile separator ","
set datafile columnheaders
set datafile missing ""
set terminal pngcairo size 900,560
set output "{png}"
set xlabel "n"
set ylabel "{ylabel}"
set logscale x
set grid
plot "{trace}" using (column("k") + 1):({expr}) with lines title "{title}"
"""


def figures_for(controlled: bool) -> list[str]:
    names = ["fig1_G_n", "fig2_regret_log", "fig3_regret_avg"]
    if controlled:
        names.append("fig4_L_n")
    return names


def script(name: str, trace: str) -> str:
    ylabel, expr, title = FIGURES[name]
    png = f"{Path(trace).stem}_{name}.png"
    return _TEMPLATE.format(title=title, png=png, ylabel=ylabel, trace=trace, expr=expr)


def referenced_columns(text: str) -> set[str]:
    return set(re.findall(r'column\("([^"]+)"\)', text))


def write_scripts(result, out_dir) -> list[Path]:
    """One script per figure, plotting the first seed's trace."""
    out_dir = Path(out_dir)
    seed = result.seeds[0]
    trace = result.trace_paths[seed].name
    written = []
    for name in figures_for(result.config.control.enabled):
        path = out_dir / f"{result.config.output.name}_{name}.gp"
        path.write_text(script(name, trace))
        written.append(path)
    return written
