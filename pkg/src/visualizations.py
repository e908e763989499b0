import numpy as np
import plotly.express as px
import plotly.graph_objects as go
from plotly.subplots import make_subplots

from .data_processing import CONSERVED, compute_drift

TEMPLATE = "plotly_dark"
COLOR_SCALE = "RdBu_r"

LAYOUT = dict(
    plot_bgcolor="rgba(0,0,0,0)",
    paper_bgcolor="rgba(0,0,0,0)",
    margin=dict(l=20, r=20, t=50, b=20),
    font=dict(family="Inter, sans-serif", color="#e0e0e0"),
    title_font_size=16,
)


def invariants_drift_figure(df, title="Conservation"):
    """
    Relative drift of mass, entropy and energy (top) and the L2 norm of div B (bottom, log scale).
    """
    if df.empty:
        return go.Figure()

    drift = compute_drift(df)
    fig = make_subplots(rows=2, cols=1, shared_xaxes=True, vertical_spacing=0.08,
                        subplot_titles=("relative drift", "||div B||"))
    for col in CONSERVED:
        fig.add_trace(go.Scatter(x=drift["time"], y=drift[col], mode="lines", name=col), row=1, col=1)
    # log axes cannot show exact zeros
    div_b = np.maximum(drift["div_B_l2"].to_numpy(), 1e-300)
    fig.add_trace(go.Scatter(x=drift["time"], y=div_b, mode="lines", name="div_B_l2",
                             line=dict(color="#00bc8c")), row=2, col=1)
    fig.update_yaxes(type="log", row=2, col=1, gridcolor="rgba(255,255,255,0.1)")
    fig.update_yaxes(exponentformat="e", row=1, col=1, gridcolor="rgba(255,255,255,0.1)")
    fig.update_xaxes(title="t", row=2, col=1)
    fig.update_layout(title=title, template=TEMPLATE, **LAYOUT)
    return fig


def field_heatmap_figure(xs, ys, values, title="", colorscale=COLOR_SCALE):
    """
    Heatmap of a sampled scalar field; values are indexed [ix, iy].
    """
    fig = px.imshow(
        np.asarray(values).T,
        x=xs,
        y=ys,
        origin="lower",
        aspect="equal",
        color_continuous_scale=colorscale,
        template=TEMPLATE,
        title=title,
    )
    fig.update_layout(**LAYOUT)
    return fig


def convergence_figure(table, title="Grid convergence"):
    """
    Log-log plot of errors against h, one line per (degree, field).
    """
    if table.empty:
        return go.Figure()

    fig = go.Figure()
    error_cols = [c for c in table.columns if c.startswith("error_")]
    for degree, group in table.groupby("degree"):
        for col in error_cols:
            fig.add_trace(go.Scatter(
                x=group["h"], y=group[col], mode="lines+markers",
                name=f"p={degree} {col.removeprefix('error_')}",
            ))
    fig.update_layout(
        title=title,
        template=TEMPLATE,
        xaxis=dict(type="log", title="h", gridcolor="rgba(255,255,255,0.1)"),
        yaxis=dict(type="log", title="L2 error", exponentformat="e", gridcolor="rgba(255,255,255,0.1)"),
        **LAYOUT,
    )
    return fig
