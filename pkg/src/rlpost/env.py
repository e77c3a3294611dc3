"""Post-processing tuning as an episodic environment.

One episode is one pass over the dataset. At step ``t`` the agent sees clip
``t`` (in the episode's order), picks post-processing params, and receives a
reward derived from the event-based macro F1:

* ``per_segment``: ``r_t`` is the F1 of clip ``t`` alone.
* ``terminal_macro``: ``r_t = 0`` until the last step, which gets the F1 over
  every prediction accumulated during the episode.

Either way ``reward = F1 percentage / 100``.
"""
from __future__ import annotations

from dataclasses import dataclass

from .errors import ContractError
from .events import ClassScores, CollarConfig, macro_f1, match_events
from .postproc import apply_stack

REWARD_MODES = ("per_segment", "terminal_macro")


def reward_from_report(report):
    return report.macro_f1_percent / 100.0


@dataclass(frozen=True)
class EnvState:
    t: int
    clip: object
    terminal: bool = False


@dataclass(frozen=True)
class StepOutcome:
    reward: float
    done: bool
    next_state: EnvState | None
    segment_report: object = None


class PostProcEnv:
    def __init__(self, dataset, reward_mode="per_segment", collars=CollarConfig(), use_median=True):
        if reward_mode not in REWARD_MODES:
            raise ContractError(f"unknown reward mode {reward_mode!r}; pick one of {REWARD_MODES}")
        self.dataset = dataset
        self.reward_mode = reward_mode
        self.collars = collars
        self.use_median = use_median
        self.order = []
        self._tallies = None
        self._predictions = []
        self._finished = False
        self._state = None

    def reset(self, order="fixed", rng=None):
        n = len(self.dataset)
        if n == 0:
            raise ContractError("cannot reset on an empty dataset")
        if order == "fixed":
            self.order = list(range(n))
        elif order == "shuffled":
            if rng is None:
                raise ContractError("shuffled order needs an rng")
            self.order = [int(i) for i in rng.permutation(n)]
        else:
            raise ContractError(f"unknown order {order!r}")
        self._tallies = [ClassScores() for _ in range(self.dataset.num_classes)]
        self._predictions = []
        self._finished = False
        self._state = EnvState(0, self.dataset.clips[self.order[0]])
        return self._state

    @property
    def horizon(self):
        return len(self.order)

    @property
    def predictions(self):
        return list(self._predictions)

    def step(self, state: EnvState, params):
        if self._tallies is None:
            raise ContractError("step called before reset")
        if state.terminal or self._finished or state is not self._state:
            raise ContractError("step called on a terminal or stale state")
        clip = state.clip
        preds = apply_stack(clip, params, self.use_median)
        refs = self.dataset.references(clip.clip_id)
        seg_scores = match_events(preds, refs, self.collars, self.dataset.num_classes)
        for total, s in zip(self._tallies, seg_scores):
            total += s
        self._predictions.extend(preds)
        seg_report = macro_f1(seg_scores, self.dataset.labels)
        done = state.t == self.horizon - 1
        if self.reward_mode == "per_segment":
            reward = reward_from_report(seg_report)
        else:
            reward = reward_from_report(self._report()) if done else 0.0
        if done:
            self._finished = True
            nxt = EnvState(state.t + 1, None, terminal=True)
        else:
            nxt = EnvState(state.t + 1, self.dataset.clips[self.order[state.t + 1]])
        self._state = nxt
        return StepOutcome(reward, done, nxt, seg_report)

    def _report(self):
        return macro_f1([ClassScores(s.true_positives, s.false_positives, s.false_negatives)
                         for s in self._tallies], self.dataset.labels)

    def episode_score(self):
        if not self._finished:
            raise ContractError("episode is not finished")
        return self._report()


def evaluate_params(dataset, params, collars=CollarConfig(), use_median=True):
    """Dataset report for one params object, or a per-clip list of them."""
    per_clip = isinstance(params, (list, tuple))
    tallies = [ClassScores() for _ in range(dataset.num_classes)]
    for i, clip in enumerate(dataset.clips):
        p = params[i] if per_clip else params
        preds = apply_stack(clip, p, use_median)
        for total, s in zip(tallies, match_events(preds, dataset.references(clip.clip_id),
                                                   collars, dataset.num_classes)):
            total += s
    return macro_f1(tallies, dataset.labels)


def predict_events(dataset, params, use_median=True):
    per_clip = isinstance(params, (list, tuple))
    out = []
    for i, clip in enumerate(dataset.clips):
        out.extend(apply_stack(clip, params[i] if per_clip else params, use_median))
    return out
