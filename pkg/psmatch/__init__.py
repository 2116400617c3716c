from types import SimpleNamespace

__version__ = "0.1.0"

settings = SimpleNamespace()


def init(settings, **overrides):
    # Overlap diagnostics. Scores outside [low, high] are flagged, never rejected.
    settings.OVERLAP_LOW = 0.01
    settings.OVERLAP_HIGH = 0.99

    # Newton-Raphson for the logistic propensity model. Starts at theta=0.
    settings.MLE_TOLERANCE = 1e-10
    settings.MLE_MAX_ITERATIONS = 100
    # Any |theta_j| past this during iteration is treated as separated data.
    settings.SEPARATION_BOUND = 30.0

    # The matching estimator computes both algebraic forms and compares them.
    # Strict mode raises on disagreement; otherwise a warning is logged.
    settings.DUAL_FORM_TOLERANCE = 1e-10
    settings.DUAL_FORM_STRICT = False

    settings.DEFAULT_L = 4
    settings.DEFAULT_ALPHA = 0.05
    # Negative adjusted variances are floored at this multiple of sigma2_hat.
    settings.VARIANCE_FLOOR = 1e-12

    # None means estimation uses the raw MLE; a positive float turns on the
    # lattice discretization with that spacing.
    settings.DISCRETIZE_D = None

    settings.DEFAULT_N_LIST = (512, 1024, 2048, 4096, 8192)
    settings.DEFAULT_REPS = 2000
    settings.DEFAULT_SEED = 0

    # Keys accepted in a config file's [psmatch] section.
    # Each is [description, option class name, default].
    settings.CLI_OPTIONS = {
        "design": ["Simulation design: 1, 2 or a [design:<name>] section.", "DesignId", "1"],
        "n": ["Sample sizes to simulate.", "IntegerList", list(settings.DEFAULT_N_LIST)],
        "reps": ["Monte Carlo replications per sample size.", "PositiveInteger", settings.DEFAULT_REPS],
        "seed": ["Base seed; replication r uses seed + r.", "NonNegativeInteger", settings.DEFAULT_SEED],
        "m": ["Number of matches, or auto.", "OptionalInteger", None],
        "q": ["Same-arm variance window, or auto for [N^(1/3)].", "OptionalInteger", None],
        "l": ["Covariance window.", "PositiveInteger", settings.DEFAULT_L],
        "alpha": ["Confidence interval miscoverage level.", "Probability", settings.DEFAULT_ALPHA],
        "threads": ["Worker processes for simulate; auto uses every core.", "OptionalInteger", None],
        "theta_source": ["Which propensity parameter the point estimate uses.", "ThetaSource", "mle"],
        "d": ["Lattice spacing for theta_source = discretized.", "OptionalFloat", None],
        "input": ["Dataset to read.", "Path", None],
        "output": ["File to write.", "Path", None],
    }

    for key, value in overrides.items():
        if not hasattr(settings, key):
            raise ValueError(f"Unknown setting: {key}")
        setattr(settings, key, value)


init(settings)
