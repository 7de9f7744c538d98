"""
Catalog Module - VM Types and Three-Tier Pricing
Loads the catalog JSON, validates it, normalizes prices per interval
and picks the VM type with the best capacity/price (CP) ratio
"""
import json
import logging
import math
from dataclasses import dataclass
from decimal import Decimal, ROUND_HALF_EVEN
from fractions import Fraction
from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field, model_validator
from pydantic import ValidationError as PydanticValidationError

from errors import InputFileError, InputFormatError, ValidationError

logger = logging.getLogger(__name__)

MICROS_PER_UNIT = 1_000_000
DEFAULT_BILLING_QUANTUM = 12  # one hour at 5-minute intervals


def to_micros(amount):
    """Convert a money amount (Decimal, str, int or float) to integer micro-units"""
    value = Decimal(str(amount)) * MICROS_PER_UNIT
    return int(value.quantize(Decimal(1), rounding=ROUND_HALF_EVEN))


def from_micros(micros):
    """Convert integer micro-units back to a float money amount"""
    return micros / MICROS_PER_UNIT


class VmType(BaseModel):
    """One VM type; capacity is in demand units per running instance"""
    model_config = ConfigDict(frozen=True)

    id: str = Field(min_length=1)
    capacity: int = Field(ge=1)


class TypePrices(BaseModel):
    """Prices of one VM type, all in integer micro-units"""
    model_config = ConfigDict(frozen=True)

    upfront_total: int = Field(ge=0)   # per reserved instance per lease contract
    reserved_usage: int = Field(ge=0)  # per interval per launched reserved instance
    on_demand: int = Field(ge=0)       # per billing quantum per on-demand instance


class PriceBook(BaseModel):
    model_config = ConfigDict(frozen=True)

    lease_period: int = Field(ge=1)
    billing_quantum: int = Field(ge=1)
    prices: tuple[tuple[str, TypePrices], ...]

    @model_validator(mode='after')
    def _quantum_fits_lease(self):
        if self.billing_quantum > self.lease_period:
            raise ValueError("billing_quantum_intervals must not exceed lease_period_intervals")
        return self

    def of(self, type_id):
        for key, type_prices in self.prices:
            if key == type_id:
                return type_prices
        raise KeyError(type_id)


class Catalog(BaseModel):
    """
    VM types plus their price book

    Types are kept sorted by id so every solver sees the same order.
    The model is frozen (hashable), so one catalog can be shared by
    any number of simulation runs.
    """
    model_config = ConfigDict(frozen=True)

    vm_types: tuple[VmType, ...]
    book: PriceBook

    @model_validator(mode='after')
    def _check_types(self):
        ids = [vm.id for vm in self.vm_types]
        if len(ids) != len(set(ids)):
            duplicates = sorted({i for i in ids if ids.count(i) > 1})
            raise ValueError(f"duplicate vm_types id {', '.join(duplicates)}")
        priced = {key for key, _ in self.book.prices}
        missing = [i for i in ids if i not in priced]
        if missing:
            raise ValueError(f"no prices for {', '.join(missing)}")
        return self

    def __len__(self):
        return len(self.vm_types)

    def get(self, type_id):
        for vm in self.vm_types:
            if vm.id == type_id:
                return vm
        raise KeyError(type_id)

    def prices_of(self, type_id):
        return self.book.of(type_id)


@dataclass(frozen=True)
class UnitPrices:
    """
    Per-interval prices of a single VM type (floats, expectation math only)

    on_demand_per_interval is the quantum price spread evenly over the
    quantum; actual billing stays quantized (see simulator.account_interval).
    """
    upfront_per_interval: float
    usage_per_interval: float
    on_demand_per_interval: float
    on_demand_per_quantum: float


@dataclass(frozen=True)
class NormalizedPrices:
    lease_period: int
    billing_quantum: int
    by_type: dict

    def __getitem__(self, type_id):
        return self.by_type[type_id]


def normalize(book):
    """
    Normalize prices to one short-term interval

    Args:
        book (PriceBook): Catalog prices

    Returns:
        NormalizedPrices: upfront_total / lease_period per type, usage passed
        through, on-demand quantum price divided by the quantum length
    """
    if book.lease_period < 1:
        raise ValidationError("must be at least 1", field='lease_period_intervals')
    if book.billing_quantum < 1:
        raise ValidationError("must be at least 1", field='billing_quantum_intervals')

    by_type = {}
    for type_id, type_prices in book.prices:
        by_type[type_id] = UnitPrices(
            upfront_per_interval=from_micros(type_prices.upfront_total) / book.lease_period,
            usage_per_interval=from_micros(type_prices.reserved_usage),
            on_demand_per_interval=from_micros(type_prices.on_demand) / book.billing_quantum,
            on_demand_per_quantum=from_micros(type_prices.on_demand),
        )
    return NormalizedPrices(book.lease_period, book.billing_quantum, by_type)


def cp_ratio(vm_type, book):
    """Capacity per unit of per-interval upfront price, as an exact Fraction (inf when free)"""
    upfront = book.of(vm_type.id).upfront_total
    if upfront == 0:
        return math.inf
    return Fraction(vm_type.capacity * book.lease_period * MICROS_PER_UNIT, upfront)


def best_cp_type(catalog):
    """
    Select the VM type with the best capacity/price ratio

    The price is the per-interval upfront fee. Ratios are compared as exact
    fractions; ties go to the larger capacity, then the smaller id.

    Args:
        catalog (Catalog): Validated catalog

    Returns:
        VmType: The reference type for phase 1
    """
    if len(catalog) == 0:
        raise ValidationError("catalog has no VM types", field='vm_types')

    def rank(vm):
        return (-cp_ratio(vm, catalog.book), -vm.capacity, vm.id)

    return min(catalog.vm_types, key=rank)


# ---------------------------------------------------------------------------
# Catalog file loading
# ---------------------------------------------------------------------------

class _VmTypeEntry(BaseModel):
    model_config = ConfigDict(extra='forbid')

    id: str = Field(min_length=1)
    capacity: int = Field(ge=1)
    upfront_total: Decimal = Field(ge=0)
    reserved_usage_per_interval: Decimal = Field(ge=0)
    on_demand_per_quantum: Decimal = Field(ge=0)


class _CatalogFile(BaseModel):
    model_config = ConfigDict(extra='forbid')

    billing_quantum_intervals: int = Field(default=DEFAULT_BILLING_QUANTUM, ge=1)
    lease_period_intervals: int = Field(ge=1)
    vm_types: list[_VmTypeEntry] = Field(min_length=1)


def _field_path(error):
    return '.'.join(str(part) for part in error['loc']) or 'catalog'


def build_catalog(data):
    """
    Validate a catalog dictionary (already parsed JSON) and build a Catalog

    Raises:
        ValidationError: naming the first offending field
    """
    try:
        parsed = _CatalogFile.model_validate(data)
        seen = set()
        for position, entry in enumerate(parsed.vm_types):
            if entry.id in seen:
                raise ValidationError(f"duplicate id '{entry.id}'", field=f"vm_types.{position}.id")
            seen.add(entry.id)
        vm_types = sorted(
            (VmType(id=entry.id, capacity=entry.capacity) for entry in parsed.vm_types),
            key=lambda vm: vm.id,
        )
        prices = tuple(sorted(
            ((entry.id, TypePrices(
                upfront_total=to_micros(entry.upfront_total),
                reserved_usage=to_micros(entry.reserved_usage_per_interval),
                on_demand=to_micros(entry.on_demand_per_quantum),
            )) for entry in parsed.vm_types),
            key=lambda item: item[0],
        ))
        book = PriceBook(
            lease_period=parsed.lease_period_intervals,
            billing_quantum=parsed.billing_quantum_intervals,
            prices=prices,
        )
        catalog = Catalog(vm_types=tuple(vm_types), book=book)
    except PydanticValidationError as e:
        first = e.errors()[0]
        raise ValidationError(first['msg'], field=_field_path(first)) from e

    _warn_unprofitable(catalog)
    return catalog


def _warn_unprofitable(catalog):
    rates = normalize(catalog.book)
    for vm in catalog.vm_types:
        unit = rates[vm.id]
        if unit.upfront_per_interval + unit.usage_per_interval >= unit.on_demand_per_interval:
            logger.warning(
                "Reserving %s never pays off: upfront %.6f + usage %.6f >= on-demand %.6f per interval",
                vm.id, unit.upfront_per_interval, unit.usage_per_interval, unit.on_demand_per_interval)


def load_catalog(path):
    """
    Load and validate a catalog file

    How it works:
    1. Reads the JSON file (numbers parsed as Decimal so prices stay exact)
    2. Validates fields with pydantic (capacity >= 1, prices >= 0, unique ids)
    3. Converts prices to integer micro-units

    Args:
        path (str | Path): Catalog JSON file

    Returns:
        Catalog: vm_types plus price book (M = len(catalog))
    """
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as e:
        raise InputFileError(f"Cannot read catalog {path}: {e.strerror or e}") from e

    try:
        data = json.loads(text, parse_float=Decimal)
    except json.JSONDecodeError as e:
        raise InputFormatError(f"Malformed catalog JSON ({e.msg} at line {e.lineno})",
                               field=str(path)) from e

    catalog = build_catalog(data)
    logger.info("Loaded catalog %s with %d VM types", path, len(catalog))
    return catalog
