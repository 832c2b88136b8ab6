"""RAN slice enforcement simulator with a DDPG tenant agent."""
