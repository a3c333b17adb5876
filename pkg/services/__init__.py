from services.opf_service import CentralizedRun, DelaySettings, OpfService, opf_service

__all__ = ["CentralizedRun", "DelaySettings", "OpfService", "opf_service"]
