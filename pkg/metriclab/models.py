# metriclab/models.py

from datetime import datetime, timezone

from sqlalchemy import DateTime, Integer, String, Text, UniqueConstraint
from sqlalchemy.orm import DeclarativeBase, Mapped, mapped_column


class Base(DeclarativeBase):
    pass


def _utcnow() -> datetime:
    return datetime.now(timezone.utc)


# =====================================================
# KERNEL SERIES CACHE
# =====================================================
class KernelSeriesRecord(Base):
    __tablename__ = "kernel_series"

    id: Mapped[int] = mapped_column(Integer, primary_key=True)

    spec_text: Mapped[str] = mapped_column(String(120), nullable=False, index=True)
    degree_cap: Mapped[int] = mapped_column(Integer, nullable=False)
    # KernelSeries.to_json() document
    payload_json: Mapped[str] = mapped_column(Text, nullable=False)

    created_at: Mapped[datetime] = mapped_column(DateTime, default=_utcnow, nullable=False)

    __table_args__ = (
        UniqueConstraint("spec_text", "degree_cap", name="uq_kernel_series_spec_degree"),
    )

    def __repr__(self) -> str:
        return f"<KernelSeriesRecord {self.spec_text} D={self.degree_cap}>"
