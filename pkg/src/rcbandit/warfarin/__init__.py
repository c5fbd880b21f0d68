"""PharmGKB warfarin dosing replay."""
