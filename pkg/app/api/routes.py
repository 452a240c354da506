import logging
from typing import Dict, List, Optional

from fastapi import APIRouter, Depends, HTTPException
from pydantic import BaseModel, Field
from sqlalchemy.orm import Session

from ..models.beamforming import ScaOptions
from ..models.database import get_db, init_db
from ..models.experiment import ExperimentSpec
from ..models.result import ResultRecord
from ..models.system import SystemConfig
from ..services.experiment_service import SchemeRunner, run_sweep, scheme_averages
from ..services.scenario import generate_scenario

logger = logging.getLogger(__name__)

router = APIRouter()

# Initialize database
init_db()


# Pydantic models for request/response
class SolveRequest(BaseModel):
    config: SystemConfig
    scheme: str
    num_vectors: int = Field(1, ge=0)
    sca: ScaOptions = Field(default_factory=ScaOptions)


class SolveResponse(BaseModel):
    scheme: str
    throughput: float
    tau0: float
    device_throughputs: List[float]
    assignment: List[int]
    status: str
    iterations: int
    overhead_coefficients: int
    runtime_ms: float


class SweepResponse(BaseModel):
    sweep_id: str
    rows: int
    csv_path: str
    summary_path: str


class SchemeStats(BaseModel):
    mean_throughput: float
    mean_tau0: float
    runs: int


class DashboardResponse(BaseModel):
    schemes: Dict[str, SchemeStats]


@router.post("/solve", response_model=SolveResponse)
async def solve(request: SolveRequest):
    """Solve one scheme on the scenario generated from the given config"""
    try:
        scenario = generate_scenario(request.config)
        sol = SchemeRunner(request.sca).run(scenario, request.scheme, request.num_vectors)
        if sol is None:
            raise HTTPException(status_code=400, detail=f"Scheme {request.scheme} is not available for N={scenario.num_elements}")
        return SolveResponse(
            scheme=sol.scheme,
            throughput=sol.throughput,
            tau0=sol.alloc.tau0,
            device_throughputs=[float(r) for r in sol.device_throughputs],
            assignment=list(sol.plan.assignment),
            status=sol.status,
            iterations=sol.iterations,
            overhead_coefficients=sol.overhead_coefficients,
            runtime_ms=sol.runtime_ms,
        )
    except HTTPException:
        raise
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.error(f"Solve failed: {e}")
        raise HTTPException(status_code=500, detail=f"Solve failed: {str(e)}")


@router.post("/sweeps", response_model=SweepResponse)
async def create_sweep(spec: ExperimentSpec, db: Session = Depends(get_db)):
    """Run a sweep synchronously and store its rows"""
    try:
        outcome = run_sweep(spec, db=db, workers=1)
        return SweepResponse(
            sweep_id=outcome.sweep_id,
            rows=len(outcome.rows),
            csv_path=str(outcome.csv_path),
            summary_path=str(outcome.summary_path),
        )
    except ValueError as e:
        raise HTTPException(status_code=400, detail=str(e))
    except Exception as e:
        logger.error(f"Sweep failed: {e}")
        raise HTTPException(status_code=500, detail=f"Sweep failed: {str(e)}")


@router.get("/results")
async def get_results(sweep_id: Optional[str] = None, db: Session = Depends(get_db)):
    """Stored result rows, optionally for one sweep"""
    try:
        query = db.query(ResultRecord)
        if sweep_id:
            query = query.filter(ResultRecord.sweep_id == sweep_id)
        return [
            {
                "id": record.id,
                "sweep_id": record.sweep_id,
                "axis": record.axis,
                "axis_value": record.axis_value,
                "scheme": record.scheme,
                "seed": record.seed,
                "N": record.num_elements,
                "K": record.num_devices,
                "J": record.num_vectors,
                "throughput_bps_hz": record.throughput_bps_hz,
                "min_device_throughput": record.min_device_throughput,
                "tau0_s": record.tau0_s,
                "hap_energy_j": record.hap_energy_j,
                "status": record.status,
                "plan": record.plan,
                "created_at": record.created_at.isoformat() if record.created_at else None,
            }
            for record in query.order_by(ResultRecord.id).all()
        ]
    except Exception as e:
        raise HTTPException(status_code=500, detail=f"Failed to get results: {str(e)}")


@router.get("/dashboard", response_model=DashboardResponse)
async def get_dashboard_data(sweep_id: Optional[str] = None, db: Session = Depends(get_db)):
    """Mean throughput and charging time per scheme"""
    try:
        averages = scheme_averages(db, sweep_id)
        return DashboardResponse(schemes={scheme: SchemeStats(**stats) for scheme, stats in averages.items()})
    except Exception as e:
        raise HTTPException(status_code=500, detail=f"Dashboard data failed: {str(e)}")
