from sqlalchemy import Column, DateTime, Float, Integer, String, Text
from sqlalchemy.sql import func

from .database import Base


class ResultRecord(Base):
    __tablename__ = "sweep_results"

    id = Column(Integer, primary_key=True, index=True)
    sweep_id = Column(String, index=True)
    axis = Column(String)
    axis_value = Column(Float, index=True)
    scheme = Column(String, index=True)
    seed = Column(Integer)

    # Instance size
    num_elements = Column(Integer)
    num_devices = Column(Integer)
    num_vectors = Column(Integer)
    hap_power_dbm = Column(Float)

    # Outcome
    throughput_bps_hz = Column(Float)
    min_device_throughput = Column(Float)
    device_throughputs = Column(Text)  # semicolon-joined R_k
    tau0_s = Column(Float)
    harvested_energy_total_j = Column(Float)
    hap_energy_j = Column(Float)
    overhead_coefficients = Column(Integer)
    outer_iters = Column(Integer)
    runtime_ms = Column(Float)
    status = Column(String)
    plan = Column(Text)  # PhasePlan JSON: per-slot phases and association

    created_at = Column(DateTime(timezone=True), server_default=func.now())

    def __repr__(self):
        return f"<ResultRecord(id={self.id}, scheme='{self.scheme}', throughput={self.throughput_bps_hz})>"
