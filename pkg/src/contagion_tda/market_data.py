"""Transaction ingestion and per-agent return series.

Each trade is valued by the log move of the security's median traded price
seven calendar days later, trades on the same day are value-weighted, and
each day is labelled as inside or outside the window that precedes one of the
company's announcements.
"""
from __future__ import annotations

import bisect
import csv
import datetime as dt
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from statistics import median

import numpy as np

from .errors import InputError

logger = logging.getLogger(__name__)

HORIZON_DAYS = 7
MAX_FORWARD_TRADING_DAYS = 10


@dataclass(frozen=True)
class Transaction:
    agent_id: str
    company_id: str
    security_id: str
    date: dt.date
    side: str
    price: float
    quantity: float

    def __post_init__(self):
        if self.side not in ("buy", "sell"):
            raise InputError(f"side must be 'buy' or 'sell', got {self.side!r}")
        if not self.price > 0 or not self.quantity > 0:
            raise InputError("price and quantity must be positive")

    @property
    def volume(self) -> float:
        return self.price * self.quantity

    @property
    def sign(self) -> int:
        return 1 if self.side == "buy" else -1


@dataclass(frozen=True)
class AnnouncementCalendar:
    dates: dict  # company_id -> sorted list of dt.date
    window: int = 5

    def __post_init__(self):
        if self.window < 1:
            raise InputError("window length must be >= 1")
        for company, ds in self.dates.items():
            if any(b <= a for a, b in zip(ds, ds[1:])):
                raise InputError(f"announcement dates for {company} must be strictly increasing")


@dataclass
class AgentReturnSeries:
    """Daily returns of one agent in one company, in date order."""

    agent_id: object
    company_id: object
    returns: np.ndarray
    pre_mask: np.ndarray
    profits: np.ndarray | None = None
    dates: list = field(default_factory=list)

    def __post_init__(self):
        self.returns = np.asarray(self.returns, dtype=float)
        self.pre_mask = np.asarray(self.pre_mask, dtype=bool)
        if self.returns.shape != self.pre_mask.shape:
            raise InputError("returns and pre_mask must have the same length")
        if not np.all(np.isfinite(self.returns)):
            raise InputError("returns must be finite")
        if self.profits is not None:
            self.profits = np.asarray(self.profits, dtype=float)

    @property
    def n_pre(self) -> int:
        return int(self.pre_mask.sum())

    def __len__(self):
        return len(self.returns)

    @property
    def is_active(self) -> bool:
        """At least one entry inside and one outside the pre-announcement windows."""
        return 0 < self.n_pre < len(self)

    def cloud(self, pre: bool) -> np.ndarray:
        """``[return, profit]`` rows for one period."""
        if self.profits is None:
            raise InputError("series has no profits")
        mask = self.pre_mask if pre else ~self.pre_mask
        return np.column_stack([self.returns[mask], self.profits[mask]])


def transaction_return(tx: Transaction, future_price: float, side: str | None = None) -> float:
    """``sign * ln(future / price)``; sales earn when the price falls."""
    if not future_price > 0:
        raise InputError("future price must be positive")
    sign = tx.sign if side is None else (1 if side == "buy" else -1)
    return sign * math.log(future_price / tx.price)


def daily_value_weighted_return(returns, volumes) -> float | None:
    returns = np.asarray(returns, dtype=float)
    volumes = np.asarray(volumes, dtype=float)
    if returns.size == 0:
        return None
    if np.any(volumes <= 0):
        raise InputError("volumes must be positive")
    return float(np.dot(returns, volumes) / volumes.sum())


def _snap(day: dt.date, trading_days: list) -> int | None:
    i = bisect.bisect_left(trading_days, day)
    if i == len(trading_days):
        return None
    if trading_days[i] != day:
        logger.info("announcement %s is not a trading day, snapped to %s", day, trading_days[i])
    return i


def label_windows(calendar: AnnouncementCalendar, trading_days) -> dict:
    """Per company, the index of the announcement whose window covers each day (-1 = none).

    A window holds the ``window - 1`` trading days strictly before the
    announcement day.  Days already claimed by an earlier window stay with it.
    """
    trading_days = list(trading_days)
    if any(b <= a for a, b in zip(trading_days, trading_days[1:])):
        raise InputError("trading days must be sorted and unique")
    out = {}
    for company, dates in calendar.dates.items():
        owner = np.full(len(trading_days), -1, dtype=int)
        for j, day in enumerate(dates):
            t = _snap(day, trading_days)
            if t is None:
                logger.warning("announcement %s of %s after last trading day", day, company)
                continue
            lo = max(0, t - (calendar.window - 1))
            span = owner[lo:t]
            span[span < 0] = j
        out[company] = owner
    return out


def pre_announcement_days(calendar: AnnouncementCalendar, trading_days) -> dict:
    """Per company, the set of trading days that fall in a pre-announcement window."""
    days = list(trading_days)
    return {
        c: {days[i] for i in np.flatnonzero(owner >= 0)}
        for c, owner in label_windows(calendar, days).items()
    }


def _median_prices(transactions):
    by_day = defaultdict(list)
    for tx in transactions:
        by_day[(tx.security_id, tx.date)].append(tx.price)
    prices = defaultdict(dict)
    for (sec, day), ps in by_day.items():
        prices[sec][day] = median(ps)
    return {sec: (sorted(d), d) for sec, d in prices.items()}


def future_price(
    prices, tx: Transaction, trading_days, horizon=HORIZON_DAYS, max_forward=MAX_FORWARD_TRADING_DAYS
):
    """Median price ``horizon`` calendar days after ``tx``.

    Falls forward to the next day the security traded, at most ``max_forward``
    trading days past the target.  Returns None when nothing qualifies.
    """
    if tx.security_id not in prices:
        return None
    days, table = prices[tx.security_id]
    target = tx.date + dt.timedelta(days=horizon)
    i = bisect.bisect_left(days, target)
    if i == len(days):
        return None
    gap = bisect.bisect_left(trading_days, days[i]) - bisect.bisect_left(trading_days, target)
    return table[days[i]] if gap <= max_forward else None


def build_series(transactions, calendar: AnnouncementCalendar, trading_days=None) -> list:
    """Per (agent, company) daily value-weighted returns, profits and window labels."""
    transactions = list(transactions)
    prices = _median_prices(transactions)
    if trading_days is None:
        trading_days = sorted({tx.date for tx in transactions})
    trading_days = list(trading_days)
    pre_days = pre_announcement_days(calendar, trading_days)

    daily = defaultdict(lambda: defaultdict(list))
    skipped = 0
    for tx in transactions:
        fp = future_price(prices, tx, trading_days)
        if fp is None:
            skipped += 1
            continue
        daily[(tx.agent_id, tx.company_id)][tx.date].append((transaction_return(tx, fp), tx.volume))
    if skipped:
        logger.warning("skipped %d transactions without a future price", skipped)

    out = []
    for (agent, company), days in sorted(daily.items(), key=lambda kv: (str(kv[0][0]), str(kv[0][1]))):
        ordered = sorted(days)
        rets, profits = [], []
        for day in ordered:
            r, v = zip(*days[day])
            rv = daily_value_weighted_return(r, v)
            rets.append(rv)
            profits.append(rv * sum(v))
        pre = [d in pre_days.get(company, ()) for d in ordered]
        out.append(AgentReturnSeries(agent, company, rets, pre, profits, ordered))
    return out


def read_transactions_csv(path) -> list:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(
                Transaction(
                    agent_id=row["agent_id"],
                    company_id=row["company_id"],
                    security_id=row["security_id"],
                    date=dt.date.fromisoformat(row["date"]),
                    side=row["side"].strip().lower(),
                    price=float(row["price"]),
                    quantity=float(row["quantity"]),
                )
            )
    return out


def read_announcements_csv(path, window: int = 5) -> AnnouncementCalendar:
    dates = defaultdict(set)
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            dates[row["company_id"]].add(dt.date.fromisoformat(row["date"]))
    return AnnouncementCalendar({c: sorted(d) for c, d in dates.items()}, window)


def write_series_csv(series, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["agent_id", "company_id", "date", "return", "profit", "is_pre"])
        for s in series:
            profits = s.profits if s.profits is not None else np.full(len(s), np.nan)
            dates = s.dates or [""] * len(s)
            for d, r, p, pre in zip(dates, s.returns, profits, s.pre_mask):
                day = d.isoformat() if hasattr(d, "isoformat") else d
                w.writerow([s.agent_id, s.company_id, day, repr(float(r)), repr(float(p)), int(pre)])


def read_series_csv(path) -> list:
    rows = defaultdict(list)
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            rows[(row["agent_id"], row["company_id"])].append(row)
    out = []
    for (agent, company), rs in rows.items():
        out.append(
            AgentReturnSeries(
                agent,
                company,
                [float(r["return"]) for r in rs],
                [r["is_pre"] in ("1", "true", "True") for r in rs],
                [float(r["profit"]) for r in rs],
                [dt.date.fromisoformat(r["date"]) if r["date"] else "" for r in rs],
            )
        )
    return out
