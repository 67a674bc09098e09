/** three.js point cloud viewport with orbit controls and screen projection. */

import * as THREE from "three";
import type { DecodedCloud } from "./decode.js";
import type { CameraPose } from "./store.js";

const POINT_SIZE = 0.35;

export class CloudViewer {
  private renderer: THREE.WebGLRenderer;
  private scene = new THREE.Scene();
  private camera: THREE.PerspectiveCamera;
  private points: THREE.Points | null = null;
  private geometry: THREE.BufferGeometry | null = null;
  private pose: CameraPose = { theta: -2.4, phi: 1.15, radius: 60, target: [25, 0, 0] };
  private needsRender = true;

  constructor(private canvas: HTMLCanvasElement) {
    this.renderer = new THREE.WebGLRenderer({ canvas, antialias: true });
    this.camera = new THREE.PerspectiveCamera(55, 1, 0.1, 2000);
    this.scene.background = new THREE.Color(0x14161a);
    this.attachControls();
    const loop = () => {
      this.resizeToDisplay();
      if (this.needsRender) {
        this.applyPose();
        this.renderer.render(this.scene, this.camera);
        this.needsRender = false;
      }
      requestAnimationFrame(loop);
    };
    requestAnimationFrame(loop);
  }

  /** Replace the displayed cloud. Colors come separately via setColors. */
  setCloud(cloud: DecodedCloud): void {
    if (this.points) {
      this.scene.remove(this.points);
      this.geometry?.dispose();
      (this.points.material as THREE.Material).dispose();
    }
    this.geometry = new THREE.BufferGeometry();
    this.geometry.setAttribute("position", new THREE.BufferAttribute(cloud.positions, 3));
    this.geometry.setAttribute(
      "color",
      new THREE.BufferAttribute(new Float32Array(cloud.count * 3), 3),
    );
    const material = new THREE.PointsMaterial({
      size: POINT_SIZE,
      vertexColors: true,
      sizeAttenuation: true,
    });
    this.points = new THREE.Points(this.geometry, material);
    this.scene.add(this.points);
    if (cloud.count > 0) {
      const box = new THREE.Box3().setFromBufferAttribute(
        this.geometry.getAttribute("position") as THREE.BufferAttribute,
      );
      const c = box.getCenter(new THREE.Vector3());
      this.pose.target = [c.x, c.y, c.z];
      this.pose.radius = Math.max(10, box.getSize(new THREE.Vector3()).length() * 0.8);
    }
    this.needsRender = true;
  }

  /** Update every vertex color (triples in [0, 1]). */
  setColors(colors: Float32Array): void {
    if (!this.geometry) return;
    const attr = this.geometry.getAttribute("color") as THREE.BufferAttribute;
    (attr.array as Float32Array).set(colors);
    attr.needsUpdate = true;
    this.needsRender = true;
  }

  /** Recolor a subset of points in place. */
  tintIndices(indices: number[], rgb: [number, number, number]): void {
    if (!this.geometry) return;
    const attr = this.geometry.getAttribute("color") as THREE.BufferAttribute;
    const arr = attr.array as Float32Array;
    for (const i of indices) {
      arr[i * 3] = rgb[0];
      arr[i * 3 + 1] = rgb[1];
      arr[i * 3 + 2] = rgb[2];
    }
    attr.needsUpdate = true;
    this.needsRender = true;
  }

  /** Project every point to canvas pixels; NaN for points behind the camera. */
  projectAll(): Float32Array {
    const empty = new Float32Array(0);
    if (!this.geometry) return empty;
    this.applyPose();
    this.camera.updateMatrixWorld();
    const pos = this.geometry.getAttribute("position") as THREE.BufferAttribute;
    const w = this.canvas.clientWidth;
    const h = this.canvas.clientHeight;
    const out = new Float32Array(pos.count * 2);
    const v = new THREE.Vector3();
    const viewProj = new THREE.Matrix4().multiplyMatrices(
      this.camera.projectionMatrix,
      this.camera.matrixWorldInverse,
    );
    for (let i = 0; i < pos.count; i++) {
      v.fromBufferAttribute(pos, i).applyMatrix4(viewProj);
      // applyMatrix4 on Vector3 divides by w; w <= 0 flips the z sign
      if (v.z < -1 || v.z > 1) {
        out[i * 2] = NaN;
        out[i * 2 + 1] = NaN;
      } else {
        out[i * 2] = ((v.x + 1) / 2) * w;
        out[i * 2 + 1] = ((1 - v.y) / 2) * h;
      }
    }
    return out;
  }

  getPose(): CameraPose {
    return { ...this.pose, target: [...this.pose.target] };
  }

  setPose(pose: CameraPose): void {
    this.pose = { ...pose, target: [...pose.target] };
    this.needsRender = true;
  }

  // ----------------------------------------------------------- internals

  private applyPose(): void {
    const { theta, phi, radius, target } = this.pose;
    const t = new THREE.Vector3(...target);
    this.camera.position.set(
      t.x + radius * Math.sin(phi) * Math.cos(theta),
      t.y + radius * Math.sin(phi) * Math.sin(theta),
      t.z + radius * Math.cos(phi),
    );
    this.camera.up.set(0, 0, 1);
    this.camera.lookAt(t);
  }

  private resizeToDisplay(): void {
    const w = this.canvas.clientWidth;
    const h = this.canvas.clientHeight;
    if (w === 0 || h === 0) return;
    const sized = this.renderer.getSize(new THREE.Vector2());
    if (sized.x !== w || sized.y !== h) {
      this.renderer.setSize(w, h, false);
      this.camera.aspect = w / h;
      this.camera.updateProjectionMatrix();
      this.needsRender = true;
    }
  }

  private attachControls(): void {
    let dragging = false;
    let panning = false;
    let lastX = 0;
    let lastY = 0;
    this.canvas.addEventListener("pointerdown", (e) => {
      // left button orbits, middle or shift-left pans; selection tools
      // suppress these via stopPropagation on their own overlay
      if (e.button === 1 || (e.button === 0 && e.shiftKey)) panning = true;
      else if (e.button === 0) dragging = true;
      lastX = e.clientX;
      lastY = e.clientY;
      this.canvas.setPointerCapture(e.pointerId);
    });
    this.canvas.addEventListener("pointermove", (e) => {
      const dx = e.clientX - lastX;
      const dy = e.clientY - lastY;
      lastX = e.clientX;
      lastY = e.clientY;
      if (dragging) {
        this.pose.theta -= dx * 0.005;
        this.pose.phi = Math.min(Math.PI - 0.05, Math.max(0.05, this.pose.phi - dy * 0.005));
        this.needsRender = true;
      } else if (panning) {
        const scale = this.pose.radius * 0.0015;
        const right = new THREE.Vector3();
        const up = new THREE.Vector3(0, 0, 1);
        this.applyPose();
        this.camera.getWorldDirection(right).cross(up).normalize();
        const t = this.pose.target;
        t[0] -= (right.x * dx - up.x * dy) * scale;
        t[1] -= (right.y * dx - up.y * dy) * scale;
        t[2] -= (right.z * dx - up.z * dy) * scale;
        this.needsRender = true;
      }
    });
    const stop = () => {
      dragging = false;
      panning = false;
    };
    this.canvas.addEventListener("pointerup", stop);
    this.canvas.addEventListener("pointerleave", stop);
    this.canvas.addEventListener(
      "wheel",
      (e) => {
        e.preventDefault();
        this.pose.radius = Math.min(800, Math.max(2, this.pose.radius * (e.deltaY > 0 ? 1.1 : 0.9)));
        this.needsRender = true;
      },
      { passive: false },
    );
  }
}
