"""Tests package for janus module"""
