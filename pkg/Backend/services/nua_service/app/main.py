from fastapi import APIRouter

from services.nua_service.app.api import simulation

# Initialize router
nua_router = APIRouter()

# Include routers
nua_router.include_router(simulation.router, tags=["simulation"])
