import fastapi
from fastapi.middleware.cors import CORSMiddleware

from services.nua_service.app.core.config import configure_logging, get_settings
from services.nua_service.app.main import nua_router

configure_logging()

app = fastapi.FastAPI(
    title="NUA API",
    description="Network-utility-aware load balancing: scenario generation, runs and sweeps",
    version="0.1.0",
)

# Add CORS middleware
app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

app.include_router(nua_router, prefix="/nua", tags=["nua"])

@app.get("/")
async def root():
    return {"message": "Visit /docs for API documentation."}

if __name__ == "__main__":
    import uvicorn
    settings = get_settings()
    uvicorn.run(app, host=settings.host, port=settings.port)
